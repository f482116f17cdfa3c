"""Services package initialization."""

from services.data_persistence import safe_read_json, atomic_write_json, ensure_directory

__all__ = ['safe_read_json', 'atomic_write_json', 'ensure_directory']
