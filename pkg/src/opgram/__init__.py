"""n-gram opcode features for Android malware detection and categorization."""

__version__ = "0.1.0"
