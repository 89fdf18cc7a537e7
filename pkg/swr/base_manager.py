"""
Base Manager Module
================

This module provides the BaseManager class that the dataset manager inherits from.
It contains the file utilities shared by every command: directories and JSON documents.
"""

import json
from pathlib import Path
from typing import Any, Union

from .errors import DataError
from .logging import logger


class BaseManager:
    """
    Base manager class providing common file functionality.

    Methods:
        ensure_dir: Creates an output directory if needed
        write_json: Writes a JSON document with proper error handling
        read_json: Reads a JSON document with proper error handling
    """

    ENCODING = "utf-8"

    @classmethod
    def ensure_dir(cls, path: Union[str, Path]) -> Path:
        """
        Creates a directory (and its parents) if it does not exist.

        Args:
            path: Directory path

        Returns:
            Path: The directory

        Raises:
            DataError: If the directory cannot be created
        """
        path = Path(path)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Cannot create directory {path}: {e}")
            raise DataError(f"Cannot create directory {path}: {e}") from e
        return path

    @classmethod
    def write_json(cls, path: Union[str, Path], data: Any) -> Path:
        """
        Writes data as indented JSON.

        Args:
            path: Target file
            data: JSON-serializable object

        Returns:
            Path: The written file

        Raises:
            DataError: If the file cannot be written or data is not serializable
        """
        path = Path(path)
        try:
            text = json.dumps(data, indent=2)
            path.write_text(text + "\n", encoding=cls.ENCODING)
        except (OSError, TypeError, ValueError) as e:
            logger.error(f"Writing {path} failed: {e}")
            raise DataError(f"Writing {path} failed: {e}") from e
        return path

    @classmethod
    def read_json(cls, path: Union[str, Path]) -> Any:
        """
        Reads a JSON document.

        Args:
            path: Source file

        Returns:
            The decoded document

        Raises:
            DataError: If the file is missing or not valid JSON
        """
        path = Path(path)
        try:
            return json.loads(path.read_text(encoding=cls.ENCODING))
        except OSError as e:
            raise DataError(f"Cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
