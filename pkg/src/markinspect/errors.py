"""Exception hierarchy shared by all markinspect modules."""


class MarkInspectError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedFormat(MarkInspectError):
    pass


class CorruptStream(MarkInspectError):
    pass


class EncodeFailure(MarkInspectError):
    pass


class EmptyPlane(MarkInspectError):
    pass


class DimensionMismatch(MarkInspectError):
    pass


class BadBlockSize(MarkInspectError):
    pass


class CapacityExceeded(MarkInspectError):
    def __init__(self, required_bits: int, available_bits: int):
        super().__init__(
            f"payload needs {required_bits} bits but image holds {available_bits}"
        )
        self.required_bits = required_bits
        self.available_bits = available_bits


class NotFound(MarkInspectError):
    pass


class CorruptFrame(MarkInspectError):
    pass


class ImageTooSmall(MarkInspectError):
    def __init__(self, message: str, min_width: int, min_height: int):
        super().__init__(f"{message} (minimum {min_width}x{min_height})")
        self.min_width = min_width
        self.min_height = min_height


class EmptyRegistry(MarkInspectError):
    pass


class CorruptContainer(MarkInspectError):
    pass


class FragmentGap(MarkInspectError):
    pass


class MalformedBox(MarkInspectError):
    pass


class StoreIoFailure(MarkInspectError):
    pass


class BadParams(MarkInspectError, ValueError):
    pass


class EmptyCorpus(MarkInspectError):
    pass
