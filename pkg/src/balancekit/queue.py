"""Indexed binary max-heap over nodes, used by the greedy scheduler."""

from __future__ import annotations

from typing import Sequence


class GainQueue:
    """Max-priority queue keyed by node id with O(log n) priority updates.

    Ties are broken toward the smallest node id, so ``top()`` is deterministic.
    """

    def __init__(self, priorities: Sequence[float]):
        self._prio = [float(p) for p in priorities]
        self._heap = list(range(len(self._prio)))
        self._pos = list(range(len(self._prio)))
        for k in reversed(range(len(self._heap) // 2)):
            self._sink(k)

    def __len__(self) -> int:
        return len(self._heap)

    def priority(self, node: int) -> float:
        return self._prio[node]

    def top(self) -> int:
        if not self._heap:
            raise IndexError("top of empty queue")
        return self._heap[0]

    def update(self, node: int, priority: float) -> None:
        old = self._prio[node]
        self._prio[node] = priority
        if priority > old:
            self._swim(self._pos[node])
        elif priority < old:
            self._sink(self._pos[node])

    def rebuild(self, priorities: Sequence[float]) -> None:
        self.__init__(priorities)

    def _before(self, a: int, b: int) -> bool:
        pa, pb = self._prio[a], self._prio[b]
        return pa > pb or (pa == pb and a < b)

    def _swap(self, i: int, j: int) -> None:
        heap = self._heap
        heap[i], heap[j] = heap[j], heap[i]
        self._pos[heap[i]] = i
        self._pos[heap[j]] = j

    def _swim(self, k: int) -> None:
        heap = self._heap
        while k > 0:
            parent = (k - 1) >> 1
            if not self._before(heap[k], heap[parent]):
                break
            self._swap(k, parent)
            k = parent

    def _sink(self, k: int) -> None:
        heap = self._heap
        size = len(heap)
        while True:
            left = 2 * k + 1
            if left >= size:
                break
            best = left
            right = left + 1
            if right < size and self._before(heap[right], heap[left]):
                best = right
            if not self._before(heap[best], heap[k]):
                break
            self._swap(k, best)
            k = best
