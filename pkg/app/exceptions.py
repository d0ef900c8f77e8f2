# app/exceptions.py


class PotError(Exception):
    """Base class for every error raised by the library."""


class InfeasiblePyramidError(PotError):
    def __init__(self, level, frame_count):
        self.level = level
        self.frame_count = frame_count
        super().__init__(
            f"pyramid level {level} needs {2 ** (level - 1)} segments "
            f"but the sequence has only {frame_count} frames"
        )


class FilterBoundsError(PotError):
    pass


class DimensionMismatchError(PotError):
    pass


class NonFiniteError(PotError):
    pass


class DescriptorFormatError(PotError):
    def __init__(self, path, message, line=None, column=None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


class InsufficientDataError(PotError):
    pass


class ConvergenceError(PotError):
    pass


class KernelError(PotError):
    pass


class ManifestError(PotError):
    pass


class MissingFeatureError(PotError):
    def __init__(self, video_ids, what="feature vectors"):
        self.video_ids = sorted(video_ids)
        super().__init__(f"missing {what} for: {', '.join(self.video_ids)}")


class FrameRangeError(PotError):
    pass
