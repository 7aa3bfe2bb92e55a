# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ARC4 keystream generator; same interface as ``_arc4_py.Arc4``."""

from libc.stdint cimport uint32_t, uint64_t


cdef class Arc4:
    cdef unsigned char s[256]
    cdef unsigned char i
    cdef unsigned char j

    def __init__(self, key):
        cdef bytes k = bytes(key)
        cdef Py_ssize_t klen = len(k)
        cdef const unsigned char[:] kv
        cdef int a
        cdef unsigned char jj = 0, tmp
        if klen < 1 or klen > 256:
            raise ValueError(f"ARC4 key must be 1..256 bytes, got {klen}")
        kv = k
        for a in range(256):
            self.s[a] = <unsigned char>a
        for a in range(256):
            jj = <unsigned char>(jj + self.s[a] + kv[a % klen])
            tmp = self.s[a]
            self.s[a] = self.s[jj]
            self.s[jj] = tmp
        self.i = 0
        self.j = 0

    cdef inline unsigned char _byte(self) noexcept:
        cdef unsigned char si, sj
        self.i = <unsigned char>(self.i + 1)
        si = self.s[self.i]
        self.j = <unsigned char>(self.j + si)
        sj = self.s[self.j]
        self.s[self.i] = sj
        self.s[self.j] = si
        return self.s[<unsigned char>(si + sj)]

    cdef inline uint32_t _word(self) noexcept:
        cdef uint32_t w = self._byte()
        w = (w << 8) | self._byte()
        w = (w << 8) | self._byte()
        w = (w << 8) | self._byte()
        return w

    cdef inline uint32_t _below(self, uint64_t n) noexcept:
        cdef uint64_t limit = (<uint64_t>1 << 32) - ((<uint64_t>1 << 32) % n)
        cdef uint64_t w
        while True:
            w = self._word()
            if w < limit:
                return <uint32_t>(w % n)

    def keystream(self, Py_ssize_t n):
        cdef bytearray out = bytearray(n)
        cdef unsigned char[:] ov = out
        cdef Py_ssize_t k
        for k in range(n):
            ov[k] = self._byte()
        return bytes(out)

    def next_word(self):
        return self._word()

    def next_below(self, n):
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > (1 << 32):
            raise ValueError("n must be <= 2**32")
        return self._below(n)

    def below_many(self, n, Py_ssize_t count):
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > (1 << 32):
            raise ValueError("n must be <= 2**32")
        cdef uint64_t nn = n
        cdef Py_ssize_t k
        cdef list out = [0] * count
        for k in range(count):
            out[k] = self._below(nn)
        return out

    def state(self):
        return [self.s[a] for a in range(256)], self.i, self.j
