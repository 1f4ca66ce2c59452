"""Slow, independent reference implementations used only by the tests."""

from collections import deque
import math

import numpy as np


def flood_fill_components(binary) -> int:
    """26-connected component count by breadth-first search."""
    binary = np.asarray(binary, dtype=bool)
    seen = np.zeros_like(binary)
    dims = binary.shape
    offsets = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1) if (a, b, c) != (0, 0, 0)]
    count = 0
    for start in zip(*np.nonzero(binary)):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            z, y, x = queue.popleft()
            for dz, dy, dx in offsets:
                n = (z + dz, y + dy, x + dx)
                if all(0 <= n[i] < dims[i] for i in range(3)) and binary[n] and not seen[n]:
                    seen[n] = True
                    queue.append(n)
    return count


def ellipsoid_voxel_count(shape, radius=0.9) -> int:
    total = 0
    for i in range(shape[0]):
        for j in range(shape[1]):
            for k in range(shape[2]):
                u = [(idx + 0.5 - n / 2) / (radius * n / 2) for idx, n in zip((i, j, k), shape)]
                total += sum(c * c for c in u) <= 1.0
    return total


def silhouette_bruteforce(X, labels) -> float:
    X = [list(map(float, row)) for row in X]
    labels = list(labels)
    n = len(X)

    def dist(i, j):
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(X[i], X[j])))

    classes = sorted(set(labels))
    total = 0.0
    for i in range(n):
        same = [dist(i, j) for j in range(n) if j != i and labels[j] == labels[i]]
        a = sum(same) / len(same)
        b = min(
            sum(dist(i, j) for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in classes
            if c != labels[i]
        )
        m = max(a, b)
        total += 0.0 if m == 0 else (b - a) / m
    return total / n


def kde_density_1d(x, centers, h) -> float:
    return sum(math.exp(-0.5 * ((x - c) / h) ** 2) / (h * math.sqrt(2 * math.pi)) for c in centers) / len(centers)


def mean_pairwise_bruteforce(points) -> float:
    pts = [list(map(float, p)) for p in points]
    ds = [math.dist(pts[i], pts[j]) for i in range(len(pts)) for j in range(i + 1, len(pts))]
    return sum(ds) / len(ds)
