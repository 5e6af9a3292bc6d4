"""Brute-force graph statistics by direct enumeration, for cross-checking."""

import itertools
from fractions import Fraction

import numpy as np

INF = float("inf")


def random_graph_edges(n, p, gen):
    iu, ju = np.triu_indices(n, 1)
    keep = gen.random(iu.shape[0]) < p
    return frozenset(zip(iu[keep].tolist(), ju[keep].tolist()))


def adjacency_sets(n, edges):
    nb = [set() for _ in range(n)]
    for i, j in edges:
        nb[i].add(j)
        nb[j].add(i)
    return nb


def floyd_warshall(n, edges):
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for i, j in edges:
        d[i][j] = d[j][i] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def shortest_paths(nb, s, t, length):
    """Every walk of exactly ``length`` hops from s to t (all are simple when length is the distance)."""
    out = []

    def extend(path):
        if len(path) - 1 == length:
            if path[-1] == t:
                out.append(tuple(path))
            return
        for w in nb[path[-1]]:
            if w not in path:
                extend(path + [w])

    extend([s])
    return out


def stats(n, edges):
    nb = adjacency_sets(n, edges)
    d = floyd_warshall(n, edges)
    triangles = sum(1 for a, b, c in itertools.combinations(range(n), 3) if b in nb[a] and c in nb[a] and c in nb[b])

    bc = [Fraction(0)] * n
    for s, t in itertools.combinations(range(n), 2):
        if d[s][t] == INF:
            continue
        paths = shortest_paths(nb, s, t, d[s][t])
        for v in range(n):
            if v in (s, t):
                continue
            bc[v] += Fraction(sum(v in p for p in paths), len(paths))

    close = []
    for i in range(n):
        total = sum(d[i][j] for j in range(n) if j != i and d[i][j] != INF)
        close.append(0.0 if total == 0 else 1.0 / total)

    dd = [0.0] * n
    for i in range(n):
        dd[len(nb[i])] += 1.0 / n

    esp = [0.0] * max(n - 1, 1)
    for i, j in edges:
        esp[len(nb[i] & nb[j])] += 1.0 / len(edges)

    geo = [0.0] * (n + 1)
    pairs = list(itertools.combinations(range(n), 2))
    for i, j in pairs:
        geo[n if d[i][j] == INF else d[i][j]] += 1.0 / len(pairs)

    return {
        "edges": len(edges),
        "triangles": triangles,
        "betweenness": [float(b) for b in bc],
        "closeness": close,
        "dd": dd,
        "espd": esp,
        "gdd": geo,
    }
