"""Reproducible random streams.

Streams are Philox generators keyed by ``(seed_root, experiment, block)``
through :class:`numpy.random.SeedSequence`.  Paths are grouped into fixed-size
blocks so batched sampling stays vectorized while every path index maps to a
single, stable stream regardless of how many paths a run requests.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

BLOCK_SIZE = 256


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "little")


def make_generator(seed_root: int, *labels) -> np.random.Generator:
    """Philox generator for an arbitrary label tuple (ints or strings)."""
    key = tuple(_label_key(x) if isinstance(x, str) else int(x) for x in labels)
    ss = np.random.SeedSequence(entropy=int(seed_root), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PathStreams:
    """Deterministic family of per-block streams for ``n_paths`` paths.

    Parameters
    ----------
    seed_root : int
        Run-level seed.
    experiment : str
        Experiment label mixed into the stream key.
    n_paths : int
        Number of paths.
    block_size : int
        Paths per stream.  Path ``i`` is drawn from block ``i // block_size``.
    """

    seed_root: int
    experiment: str
    n_paths: int
    block_size: int = BLOCK_SIZE
    tag: tuple = field(default=())
    block_offset: int = 0

    def blocks(self):
        """Yield ``(start, stop, generator)`` for each block."""
        for b, start in enumerate(range(0, self.n_paths, self.block_size)):
            stop = min(start + self.block_size, self.n_paths)
            yield start, stop, make_generator(self.seed_root, self.experiment, *self.tag,
                                              b + self.block_offset)

    def child(self, *tag) -> "PathStreams":
        """Independent stream family sharing the path layout."""
        return replace(self, tag=self.tag + tuple(tag))

    def subrange(self, start: int, stop: int) -> "PathStreams":
        """Streams of paths ``start:stop``; ``start`` must be block-aligned."""
        if start % self.block_size:
            raise ValueError(f"subrange start {start} is not a multiple of {self.block_size}")
        return replace(self, n_paths=stop - start,
                       block_offset=self.block_offset + start // self.block_size)

    @property
    def record(self) -> dict:
        return {"seed_root": int(self.seed_root), "experiment": self.experiment,
                "n_paths": int(self.n_paths), "block_size": int(self.block_size),
                "tag": list(self.tag), "block_offset": int(self.block_offset),
                "bit_generator": "Philox"}


def as_streams(rng, n_paths: int) -> PathStreams | np.random.Generator:
    if isinstance(rng, (PathStreams, np.random.Generator)):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return PathStreams(0 if rng is None else int(rng), "default", n_paths)
    raise TypeError(f"unsupported rng type {type(rng).__name__}")


def iter_blocks(rng, n_paths: int):
    """Uniform block iteration over a generator or a :class:`PathStreams`."""
    rng = as_streams(rng, n_paths)
    if isinstance(rng, np.random.Generator):
        yield 0, n_paths, rng
    else:
        if rng.n_paths != n_paths:
            raise ValueError(f"streams cover {rng.n_paths} paths, requested {n_paths}")
        yield from rng.blocks()


def seed_record_of(rng) -> dict:
    if isinstance(rng, PathStreams):
        return rng.record
    return {"bit_generator": type(rng.bit_generator).__name__,
            "state_digest": hashlib.sha256(repr(rng.bit_generator.state).encode()).hexdigest()[:16]}
