"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnstableEvaluation(ArithmeticError):
    """A series evaluation lost too much precision to be trusted."""


class Overflow(OverflowError):
    """A requested count exceeds the representable cap; reported, never saturated."""


class NeverSatisfiable(ValueError):
    """No sample size can meet the requested coverage (some success probability is 0)."""


class AlreadyBalanced(ValueError):
    """A rebalancing step was requested on a tree with no unbalanced vertex."""


class CapExceeded(RuntimeError):
    """A simulation hit its gene-count cap before achieving a cover.

    Attributes
    ----------
    generated : int
        Number of gene trees drawn before giving up.
    missing : frozenset
        Bipartitions of the species tree still unseen at the cap.
    """

    def __init__(self, generated, missing, message=None):
        self.generated = generated
        self.missing = frozenset(missing)
        super().__init__(
            message
            or f"no cover after {generated} gene trees; "
            f"{len(self.missing)} bipartition(s) unseen"
        )
