"""Capacity-k heap of the largest-magnitude feature weights.

A binary min-heap ordered by (|weight|, -feature_id) with a feature -> slot
map, so re-offering a tracked feature updates it in place and both update
and insert cost O(log k) comparisons. For offer streams that never lower a
tracked feature's magnitude, the retained set equals the top-k by |most
recent weight| with ties going to the smaller feature id; when a member is
downgraded it keeps its slot until a stronger candidate arrives, because
the weights of previously evicted features are forgotten (the price of
O(k) memory). Features evicted here keep their mass in the sketch and may
re-enter on a later offer.
"""

from __future__ import annotations

import numpy as np


class TopKHeap:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._heap: list[list] = []    # slots of [mag, -id, id, weight]
        self._pos: dict[int, int] = {}  # feature id -> slot

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, feature: int) -> bool:
        return int(feature) in self._pos

    def offer(self, feature: int, weight: float) -> None:
        """Track a (possibly updated) weight for a feature.

        A tracked feature is always updated in place. A new feature is
        inserted if there is room, or if it outranks the weakest entry,
        which is then evicted.
        """
        if not np.isfinite(weight):
            raise ValueError("weight must be finite")
        feature = int(feature)
        weight = float(weight)
        key = [abs(weight), -feature, feature, weight]
        slot = self._pos.get(feature)
        if slot is not None:
            self._heap[slot] = key
            self._sift_down(self._sift_up(slot))
        elif len(self._heap) < self.capacity:
            self._heap.append(key)
            self._pos[feature] = len(self._heap) - 1
            self._sift_up(len(self._heap) - 1)
        elif key[:2] > self._heap[0][:2]:
            del self._pos[self._heap[0][2]]
            self._heap[0] = key
            self._pos[feature] = 0
            self._sift_down(0)

    def offer_many(self, ids: np.ndarray, weights: np.ndarray) -> None:
        """Offer a batch of distinct features (one pass of in-place updates,
        then candidate inserts in descending rank with early cutoff)."""
        member = np.fromiter((int(i) in self._pos for i in ids),
                             dtype=bool, count=len(ids))
        for i, w in zip(ids[member], weights[member]):
            self.offer(int(i), float(w))
        cand_ids = ids[~member]
        if len(cand_ids) == 0:
            return
        cand_w = weights[~member]
        order = np.lexsort((cand_ids, -np.abs(cand_w)))
        for idx in order:
            feature, weight = int(cand_ids[idx]), float(cand_w[idx])
            if len(self._heap) < self.capacity:
                self.offer(feature, weight)
            elif [abs(weight), -feature] > self._heap[0][:2]:
                self.offer(feature, weight)
            else:
                break  # sorted descending: nothing further can rank in

    def clone(self) -> "TopKHeap":
        other = TopKHeap(self.capacity)
        other._heap = [entry[:] for entry in self._heap]
        other._pos = dict(self._pos)
        return other

    def members(self) -> set[int]:
        """Currently retained feature ids."""
        return set(self._pos.keys())

    def member_ids(self) -> np.ndarray:
        """Retained ids as a sorted uint64 array."""
        arr = np.fromiter(self._pos.keys(), dtype=np.uint64,
                          count=len(self._pos))
        arr.sort()
        return arr

    def weight(self, feature: int) -> float:
        slot = self._pos.get(int(feature))
        if slot is None:
            raise KeyError(feature)
        return self._heap[slot][3]

    def snapshot(self) -> list[tuple[int, float]]:
        """(feature, weight) pairs, descending |weight|, ties by smaller id."""
        ranked = sorted(self._heap, key=lambda e: (-e[0], e[2]))
        return [(e[2], e[3]) for e in ranked]

    def to_csv(self) -> str:
        lines = ["feature_id,weight"]
        lines += [f"{f},{w!r}" for f, w in self.snapshot()]
        return "\n".join(lines) + "\n"

    def _swap(self, i: int, j: int) -> None:
        heap = self._heap
        heap[i], heap[j] = heap[j], heap[i]
        self._pos[heap[i][2]] = i
        self._pos[heap[j][2]] = j

    def _sift_up(self, i: int) -> int:
        heap = self._heap
        while i > 0:
            parent = (i - 1) // 2
            if heap[i][:2] < heap[parent][:2]:
                self._swap(i, parent)
                i = parent
            else:
                break
        return i

    def _sift_down(self, i: int) -> int:
        heap = self._heap
        n = len(heap)
        while True:
            left, right = 2 * i + 1, 2 * i + 2
            small = i
            if left < n and heap[left][:2] < heap[small][:2]:
                small = left
            if right < n and heap[right][:2] < heap[small][:2]:
                small = right
            if small == i:
                return i
            self._swap(i, small)
            i = small
