"""Pure-Python ARC4 keystream generator (fallback for the compiled core)."""

from __future__ import annotations

_WORD = 1 << 32


class Arc4:
    __slots__ = ("_s", "_i", "_j")

    def __init__(self, key: bytes) -> None:
        key = bytes(key)
        if not 1 <= len(key) <= 256:
            raise ValueError(f"ARC4 key must be 1..256 bytes, got {len(key)}")
        s = list(range(256))
        j = 0
        klen = len(key)
        for i in range(256):
            j = (j + s[i] + key[i % klen]) & 0xFF
            s[i], s[j] = s[j], s[i]
        self._s = s
        self._i = 0
        self._j = 0

    def keystream(self, n: int) -> bytes:
        s = self._s
        i, j = self._i, self._j
        out = bytearray(n)
        for k in range(n):
            i = (i + 1) & 0xFF
            si = s[i]
            j = (j + si) & 0xFF
            sj = s[j]
            s[i] = sj
            s[j] = si
            out[k] = s[(si + sj) & 0xFF]
        self._i, self._j = i, j
        return bytes(out)

    def next_word(self) -> int:
        return int.from_bytes(self.keystream(4), "big")

    def next_below(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > _WORD:
            raise ValueError("n must be <= 2**32")
        limit = _WORD - (_WORD % n)
        while True:
            w = self.next_word()
            if w < limit:
                return w % n

    def below_many(self, n: int, count: int) -> list[int]:
        return [self.next_below(n) for _ in range(count)]

    def state(self) -> tuple[list[int], int, int]:
        return list(self._s), self._i, self._j
