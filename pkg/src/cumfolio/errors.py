"""Exception hierarchy shared by all cumfolio modules."""


class CumfolioError(Exception):
    """Base class for every error raised by this package."""


# data ingestion
class MissingTicker(CumfolioError):
    pass


class NonPositivePrice(CumfolioError):
    pass


class MalformedRow(CumfolioError):
    pass


class TooShort(CumfolioError):
    pass


class OutOfRange(CumfolioError):
    pass


class InvalidWeights(CumfolioError):
    pass


# tensors and factorization
class UnsupportedOrder(CumfolioError):
    pass


class DimMismatch(CumfolioError):
    pass


class RowMismatch(CumfolioError):
    pass


class NotFinite(CumfolioError):
    pass


class ZeroVariance(CumfolioError):
    pass


# hurst / dfa
class BoxTooLarge(CumfolioError):
    pass


# backtest
class DegenerateDenominator(CumfolioError):
    pass


class WindowTooShort(CumfolioError):
    pass


class InsufficientHistory(CumfolioError):
    pass
