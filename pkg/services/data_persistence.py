"""
Data persistence utilities: atomic JSON writes and JSON / JSON-lines reads.

Reports are written with temp file + rename so an interrupted batch never
leaves a half-written report behind.
"""

import json
import logging
import os
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)


def safe_read_json(file_path: str, default: Any = None) -> Optional[Any]:
    """
    Read a JSON file, returning a default when it is absent or invalid.

    Args:
        file_path: Path to JSON file
        default: Value returned if the file doesn't exist or is invalid

    Returns:
        Parsed JSON data or default value
    """
    if not os.path.exists(file_path):
        return default

    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (json.JSONDecodeError, IOError) as exc:
        logger.warning("Ignoring unreadable JSON file %s: %s", file_path, exc)
        return default


def atomic_write_json(file_path: str, data: Any) -> bool:
    """
    Atomically write pretty-printed JSON to a file.

    Args:
        file_path: Destination path
        data: JSON-serializable data

    Returns:
        True if successful, False otherwise
    """
    ensure_directory(file_path)
    temp_path = f"{file_path}.tmp"

    try:
        with open(temp_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
            f.write('\n')
        os.replace(temp_path, file_path)
        return True
    except (IOError, OSError) as exc:
        logger.error("Failed to write %s: %s", file_path, exc)
        if os.path.exists(temp_path):
            try:
                os.remove(temp_path)
            except OSError:
                pass
        return False


def ensure_directory(file_path: str) -> None:
    """
    Ensure the parent directory of a file path exists.

    Args:
        file_path: Path to file (its directory will be created)
    """
    directory = os.path.dirname(file_path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


def iter_jsonl(file_path: str) -> Iterator[Tuple[int, Union[Dict[str, Any], ValueError]]]:
    """
    Yield (line number, object) for each non-blank line of a JSON-lines file.

    A line that is not a JSON object yields a ValueError naming the line
    instead of a dictionary, so callers decide whether to stop or skip.

    Raises:
        OSError: If the file cannot be opened
    """
    with open(file_path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_number, ValueError(f"{file_path}:{line_number}: invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict):
                yield line_number, ValueError(f"{file_path}:{line_number}: expected a JSON object")
                continue
            yield line_number, record


def read_jsonl(file_path: str) -> List[Dict[str, Any]]:
    """
    Read a JSON-lines file of objects, skipping blank lines.

    Args:
        file_path: UTF-8 JSON-lines file

    Returns:
        One dictionary per non-blank line

    Raises:
        OSError: If the file cannot be opened
        ValueError: If a line is not a JSON object (message names the line)
    """
    records: List[Dict[str, Any]] = []
    for _, record in iter_jsonl(file_path):
        if isinstance(record, ValueError):
            raise record
        records.append(record)
    return records
