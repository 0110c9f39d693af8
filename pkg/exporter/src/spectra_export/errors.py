class ExportError(Exception):
    """Base for everything this tool raises on purpose."""


class ConfigError(ExportError):
    """Bad flags, bad backbone choice, bad option values."""


class DataError(ExportError):
    """Unreadable images, malformed manifests, format violations."""
