"""Exception hierarchy shared by every stage of the pipeline."""


class StockSelectError(Exception):
    """Base class for all package errors."""


class SchemaError(StockSelectError, ValueError):
    pass


class DataError(StockSelectError, ValueError):
    pass


class DegenerateVolatility(StockSelectError, ArithmeticError):
    """Raised when a forward window has zero return volatility."""


class EmptyDatasetError(StockSelectError, ValueError):
    pass


class OverlapError(StockSelectError, ValueError):
    pass


class SplitError(StockSelectError, ValueError):
    pass


class ContractError(StockSelectError, ValueError):
    pass


class ShapeError(StockSelectError, ValueError):
    pass


class TrainingError(StockSelectError, ValueError):
    pass


class DivergenceError(StockSelectError, ArithmeticError):
    pass


class ArchitectureError(StockSelectError, ValueError):
    pass


class StackingError(StockSelectError, ValueError):
    pass


class UndefinedAUCError(StockSelectError, ValueError):
    pass


class SizingError(StockSelectError, ValueError):
    pass


class RangeError(StockSelectError, ValueError):
    pass
