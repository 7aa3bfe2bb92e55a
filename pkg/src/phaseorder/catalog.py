"""Pass catalog and the phase-order sequence type built on top of it."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_CATALOG = "llvm-3.7.1-passes.txt"


class CatalogError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PassId:
    index: int
    name: str

    def __str__(self) -> str:
        return self.name


class Origin(str, enum.Enum):
    RANDOM = "random"
    MODEL = "model"
    STANDARD_LEVEL = "standard_level"
    MANUAL = "manual"


@dataclass(frozen=True)
class PassSequence:
    items: tuple[PassId, ...] = ()
    origin: Origin = Origin.MANUAL

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.items)


@dataclass(frozen=True)
class PassCatalog:
    passes: tuple[PassId, ...]
    source_label: str = ""
    _by_name: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.passes:
            raise CatalogError("catalog is empty")
        seen = {}
        for i, p in enumerate(self.passes):
            if not p.name.startswith("-") or len(p.name) < 2:
                raise CatalogError(f"invalid pass name {p.name!r}")
            if p.name in seen:
                raise CatalogError(f"duplicate pass name {p.name!r}")
            if p.index != i:
                raise CatalogError(f"pass {p.name!r} has index {p.index}, expected {i}")
            seen[p.name] = p
        self._by_name.update(seen)

    @classmethod
    def from_names(cls, names: Iterable[str], source_label: str = "") -> "PassCatalog":
        return cls(tuple(PassId(i, n) for i, n in enumerate(names)), source_label)

    def __len__(self) -> int:
        return len(self.passes)

    def __getitem__(self, index: int) -> PassId:
        return self.passes[index]

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.passes]

    def lookup(self, name: str) -> PassId:
        try:
            return self._by_name[name]
        except KeyError:
            raise CatalogError(f"pass {name!r} is not in catalog {self.source_label!r}") from None

    def sequence(self, names: Sequence[str], origin: Origin = Origin.MANUAL) -> PassSequence:
        return PassSequence(tuple(self.lookup(n) for n in names), Origin(origin))

    def from_indices(self, indices: Iterable[int], origin: Origin) -> PassSequence:
        passes = self.passes
        return PassSequence(tuple(passes[i] for i in indices), origin)

    def validate(self, seq: PassSequence) -> None:
        for p in seq.items:
            if self._by_name.get(p.name) != p:
                raise CatalogError(f"pass {p.name!r} does not resolve in catalog {self.source_label!r}")


def parse_catalog(text: str, source_label: str = "") -> PassCatalog:
    """Parse catalog text: one pass per line, ``#`` comments and blank lines skipped."""
    names = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        names.append(line)
    return PassCatalog.from_names(names, source_label)


def load_catalog(path: str | Path | None = None) -> PassCatalog:
    """Load a catalog file, or the bundled LLVM 3.7.1 pool when *path* is None."""
    if path is None:
        text = resources.files("phaseorder.data").joinpath(DEFAULT_CATALOG).read_text("utf-8")
        return parse_catalog(text, "LLVM 3.7.1 opt")
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise CatalogError(f"cannot read catalog {path}: {exc}") from exc
    return parse_catalog(text, path.stem)


def render_sequence(seq: PassSequence) -> list[str]:
    return [p.name for p in seq.items]
