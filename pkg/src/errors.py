"""Exception hierarchy shared by every treesobol module."""


class TreeSobolError(ValueError):
    """Base class for all treesobol errors"""


class ConfigError(TreeSobolError):
    """Invalid or missing configuration"""


class EnsembleFormatError(TreeSobolError):
    """Malformed ensemble or posterior file (bad JSON, unary node, missing field)"""


class DimensionMismatchError(TreeSobolError):
    """Dimensions disagree between trees, domain, measure or data"""


class DegenerateSplitError(TreeSobolError):
    """Split cutpoint does not strictly partition the node's current box"""


class DomainError(TreeSobolError):
    """Point or interval outside the domain or the marginal's support"""


class NegativeVarianceError(TreeSobolError, ArithmeticError):
    """Variance kernel returned a value below the negative tolerance"""


class PreconditionError(TreeSobolError):
    """Operation called outside its documented preconditions"""


class BudgetExceededError(TreeSobolError):
    """Grid oracle would enumerate more cells than allowed"""


class RankingError(TreeSobolError):
    """Rankings of different length or not in standard-competition form"""


class DataError(TreeSobolError):
    """Dataset problems: non-finite responses, missing columns, too few rows"""
