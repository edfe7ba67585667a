# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: atomic integers and the PHOLD buffer sweep.

Counter operations use the GCC ``__atomic`` builtins with sequentially
consistent ordering, so they stay atomic on free-threaded interpreters too.
The sweep runs without the GIL.
"""

from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cdef extern from *:
    """
    static inline long long tw_load(long long *p) {
        return __atomic_load_n(p, __ATOMIC_SEQ_CST);
    }
    static inline void tw_store(long long *p, long long v) {
        __atomic_store_n(p, v, __ATOMIC_SEQ_CST);
    }
    static inline long long tw_add_fetch(long long *p, long long d) {
        return __atomic_add_fetch(p, d, __ATOMIC_SEQ_CST);
    }
    #define TW_FNV_PRIME 0x100000001b3ULL
    static inline int tw_cas(long long *p, long long expected, long long desired) {
        return __atomic_compare_exchange_n(p, &expected, desired, 0,
                                           __ATOMIC_SEQ_CST, __ATOMIC_SEQ_CST);
    }
    """
    long long tw_load(long long *p) nogil
    void tw_store(long long *p, long long v) nogil
    long long tw_add_fetch(long long *p, long long d) nogil
    int tw_cas(long long *p, long long expected, long long desired) nogil
    uint64_t TW_FNV_PRIME


cdef class AtomicInt:
    """Word-sized integer with sequentially consistent atomic operations."""

    cdef long long _value

    def __cinit__(self, long long initial=0):
        self._value = initial

    cpdef long long load(self):
        return tw_load(&self._value)

    cpdef void store(self, long long value):
        tw_store(&self._value, value)

    cpdef long long add(self, long long delta):
        """Add ``delta`` and return the new value."""
        return tw_add_fetch(&self._value, delta)

    cpdef long long increment(self):
        return tw_add_fetch(&self._value, 1)

    cpdef long long decrement(self):
        return tw_add_fetch(&self._value, -1)

    cpdef bint compare_and_swap(self, long long expected, long long desired):
        return tw_cas(&self._value, expected, desired)

    def __repr__(self):
        return f"AtomicInt({self.load()})"


def sweep(list buffers, Py_ssize_t start, Py_ssize_t nread, Py_ssize_t nwrite,
          uint64_t h):
    """Fold ``nread`` bytes into an FNV-1a style hash, then overwrite the next
    ``nwrite`` bytes with hash-derived values, walking the concatenation of
    ``buffers`` cyclically from ``start``. Returns the updated hash."""
    cdef Py_ssize_t nbuf = len(buffers)
    cdef Py_ssize_t i, total = 0, seg, off, k
    cdef unsigned char v
    cdef unsigned char[::1] mv
    if nbuf == 0:
        return h
    cdef unsigned char **ptrs = <unsigned char **>malloc(nbuf * sizeof(unsigned char *))
    cdef Py_ssize_t *lens = <Py_ssize_t *>malloc(nbuf * sizeof(Py_ssize_t))
    if ptrs == NULL or lens == NULL:
        free(ptrs)
        free(lens)
        raise MemoryError()
    views = []
    try:
        for i in range(nbuf):
            buf = buffers[i]
            lens[i] = len(buf)
            ptrs[i] = NULL
            if lens[i] > 0:
                mv = buf
                views.append(mv)
                ptrs[i] = &mv[0]
            total += lens[i]
        if total == 0:
            return h
        with nogil:
            # locate the start position
            off = start % total
            seg = 0
            while off >= lens[seg]:
                off -= lens[seg]
                seg += 1
            for k in range(nread):
                h = (h ^ ptrs[seg][off]) * TW_FNV_PRIME
                off += 1
                while off >= lens[seg]:
                    off = 0
                    seg += 1
                    if seg == nbuf:
                        seg = 0
            for k in range(nwrite):
                v = <unsigned char>((h >> 32) & 0xFF)
                ptrs[seg][off] = v
                h = (h ^ v) * TW_FNV_PRIME
                off += 1
                while off >= lens[seg]:
                    off = 0
                    seg += 1
                    if seg == nbuf:
                        seg = 0
        return h
    finally:
        free(ptrs)
        free(lens)
