"""Exception types raised across opgram."""


class OpgramError(Exception):
    """Base class for every error opgram raises on purpose."""


class UnknownMnemonic(OpgramError, KeyError):
    def __init__(self, mnemonic, where=None):
        self.mnemonic = mnemonic
        self.where = where
        msg = f"unknown opcode mnemonic {mnemonic!r}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class EmptyInput(OpgramError, ValueError):
    pass


class MalformedSmali(OpgramError, ValueError):
    pass


class BadHexToken(OpgramError, ValueError):
    pass


class CorpusIOError(OpgramError, OSError):
    """A manifest or corpus file could not be read. Carries the app id if known."""

    def __init__(self, message, app_id=None):
        self.app_id = app_id
        super().__init__(message)

    def __str__(self):
        return self.args[0]


class DuplicateId(OpgramError, ValueError):
    pass


class ManifestError(OpgramError, ValueError):
    pass


class MissingFamily(OpgramError, ValueError):
    pass


class EmptyDistribution(OpgramError, ValueError):
    pass


class EmptyClass(OpgramError, ValueError):
    pass


class DimensionMismatch(OpgramError, ValueError):
    pass


class TooFewInstances(OpgramError, ValueError):
    pass


class LengthMismatch(OpgramError, ValueError):
    pass


class MissingLevel(OpgramError, ValueError):
    pass


class VocabularyMismatch(OpgramError, ValueError):
    """A stored model was trained on a different feature list."""


class FoldError(OpgramError):
    """Wraps a trainer failure with the index of the fold it happened in."""

    def __init__(self, fold, cause):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {cause}")
