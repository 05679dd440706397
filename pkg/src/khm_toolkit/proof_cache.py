"""
Persistent record of corpus files that passed the proof checker.

Uses a JSON file keyed by the sha256 of each derivation file. Each entry also
keeps the theorems the derivation cited, with their conclusions, so a hit is
only honoured when the current theorem database proves the same formulas
under the same names.
"""

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional

from filelock import FileLock

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CacheEntry:
    """
    One checked derivation file.

    Attributes:
        name: Theorem name the file registers
        formula: Rendered conclusion
        cites: Rendered conclusion of every theorem the derivation cites, by name
    """
    name: str
    formula: str
    cites: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "formula": self.formula,
            "cites": dict(sorted(self.cites.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CacheEntry":
        cites = data["cites"]
        if not isinstance(cites, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in cites.items()
        ):
            raise TypeError("cites must map theorem names to formulas")
        return cls(name=data["name"], formula=data["formula"], cites=dict(cites))


@dataclass
class CacheState:
    """Checked derivations by file digest."""
    entries: Dict[str, CacheEntry] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "entries": {digest: entry.to_dict() for digest, entry in sorted(self.entries.items())}
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CacheState":
        """Create from dictionary."""
        entries = {}
        for digest, entry in data.get("entries", {}).items():
            entries[digest] = CacheEntry.from_dict(entry)
        return cls(entries=entries)


class ProofCache:
    """
    Digest-keyed store of checked corpus files.

    Uses file locking so concurrent checkers serialise their writes.
    """

    def __init__(self, cache_file_path: Path):
        """
        Initialize the cache.

        Args:
            cache_file_path: Path to the cache JSON file
        """
        self.cache_file_path = Path(cache_file_path)
        self.lock_file_path = self.cache_file_path.with_suffix(".lock")
        self._state: Optional[CacheState] = None
        self._write_lock = threading.Lock()

    def _ensure_directory_exists(self) -> None:
        self.cache_file_path.parent.mkdir(parents=True, exist_ok=True)

    def _load_state(self) -> CacheState:
        if not self.cache_file_path.exists():
            return CacheState()
        try:
            with FileLock(self.lock_file_path):
                with open(self.cache_file_path, "r", encoding="utf-8") as f:
                    return CacheState.from_dict(json.load(f))
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
            logger.warning(f"Failed to load proof cache, starting fresh: {e}")
            return CacheState()

    def _save_state(self, state: CacheState) -> None:
        self._ensure_directory_exists()
        with FileLock(self.lock_file_path):
            with open(self.cache_file_path, "w", encoding="utf-8") as f:
                json.dump(state.to_dict(), f, indent=2)

    @property
    def state(self) -> CacheState:
        """Get current state, loading from file if needed."""
        if self._state is None:
            self._state = self._load_state()
        return self._state

    def lookup(self, digest: str) -> Optional[CacheEntry]:
        """Entry recorded for ``digest``, if any."""
        hit = self.state.entries.get(digest)
        logger.debug(f"Proof cache {'hit' if hit else 'miss'} for {digest[:12]}")
        return hit

    def record(
        self,
        digest: str,
        name: str,
        formula: str,
        cites: Optional[Mapping[str, str]] = None,
    ) -> None:
        """
        Remember that the file with ``digest`` proves ``formula`` as ``name``.

        Args:
            digest: sha256 of the derivation file
            name: Theorem name
            formula: Rendered conclusion
            cites: Rendered conclusions of the theorems the derivation cited
        """
        entry = CacheEntry(name, formula, dict(cites or {}))
        with self._write_lock:
            self.state.entries[digest] = entry
            self._save_state(self.state)

    def clear(self) -> None:
        with self._write_lock:
            self._state = CacheState()
            self._save_state(self._state)
        logger.info("Proof cache cleared")

    def __len__(self) -> int:
        return len(self.state.entries)
