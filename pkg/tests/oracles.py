"""Independent brute-force reference implementations used to check the library.

Everything here is written from the operation definitions, deliberately
without reusing library code paths, so tests compare two separate routes.
"""

import math

import numpy as np


def greedy_farthest(pairwise_dist, k, start):
    """Greedy max-min selection over an explicit distance callable.

    pairwise_dist(i, j) -> float. Ties break to the lowest index because the
    running maximum is only replaced on strict improvement.
    """
    n = pairwise_dist.shape[0] if hasattr(pairwise_dist, "shape") else None
    if n is None:
        raise TypeError("pass a dense matrix")
    selected = [start]
    while len(selected) < k:
        best_i, best_d = None, -math.inf
        for i in range(n):
            if i in selected:
                continue
            d = min(pairwise_dist[i, j] for j in selected)
            if d > best_d:
                best_d, best_i = d, i
        selected.append(best_i)
    return selected


def quat_dist_matrix(quats):
    """Dense pairwise min(||q1-q2||, ||q1+q2||) matrix from (N, 4) rows."""
    q = np.asarray(quats, dtype=float)
    n = len(q)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = min(np.linalg.norm(q[i] - q[j]), np.linalg.norm(q[i] + q[j]))
    return out


def euclid_dist_matrix(points):
    p = np.asarray(points, dtype=float)
    n = len(p)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = np.linalg.norm(p[i] - p[j])
    return out


def add_direct(vertices, r_pred, t_pred, r_gt, t_gt):
    """Per-vertex loop over the mean distance definition."""
    total = 0.0
    for v in np.asarray(vertices, dtype=float):
        a = r_pred @ v + t_pred
        b = r_gt @ v + t_gt
        total += math.sqrt(((a - b) ** 2).sum())
    return total / len(vertices)


def adds_direct(vertices, r_pred, t_pred, r_gt, t_gt):
    """Double loop over the closest-point mean distance definition."""
    verts = np.asarray(vertices, dtype=float)
    pred = [r_pred @ v + t_pred for v in verts]
    gt = [r_gt @ v + t_gt for v in verts]
    total = 0.0
    for a in pred:
        best = math.inf
        for b in gt:
            d = math.sqrt(((a - b) ** 2).sum())
            if d < best:
                best = d
        total += best
    return total / len(verts)


def adds_rowwise(vertices, r_pred, t_pred, r_gt, t_gt):
    """Row-at-a-time closest-point mean; an independent route to ADDS that
    never materializes the full pairwise matrix."""
    verts = np.asarray(vertices, dtype=float)
    pred = verts @ r_pred.T + t_pred
    gt = verts @ r_gt.T + t_gt
    total = 0.0
    for a in pred:
        total += float(np.sqrt(((gt - a) ** 2).sum(axis=1)).min())
    return total / len(verts)


def auc_integral(errors, max_threshold):
    """Exact area of the step accuracy curve, normalized by max_threshold."""
    e = np.asarray(errors, dtype=float)
    area = sum(max(0.0, max_threshold - v) for v in e if np.isfinite(v))
    return area / (len(e) * max_threshold)


def diameter_direct(points):
    p = np.asarray(points, dtype=float)
    best = 0.0
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            best = max(best, float(np.linalg.norm(p[i] - p[j])))
    return best


def softmax_attention_direct(q, k, v):
    """Row-by-row softmax attention without vectorized shortcuts."""
    q, k, v = (np.asarray(a, dtype=float) for a in (q, k, v))
    out = np.zeros((q.shape[0], v.shape[1]))
    for i in range(q.shape[0]):
        scores = np.array([q[i] @ k[j] for j in range(k.shape[0])])
        scores = scores - scores.max()
        w = np.exp(scores)
        w = w / w.sum()
        out[i] = sum(w[j] * v[j] for j in range(v.shape[0]))
    return out


def linear_attention_quadratic(q, k, v):
    """Explicit O(N^2) normalized form with phi(x) = elu(x) + 1."""
    def phi(x):
        return np.where(x > 0, x + 1.0, np.exp(np.minimum(x, 0.0)))

    fq = phi(np.asarray(q, dtype=float))
    fk = phi(np.asarray(k, dtype=float))
    weights = fq @ fk.T
    weights = weights / weights.sum(axis=1, keepdims=True)
    return weights @ np.asarray(v, dtype=float)


def score_matrix_direct(dp, dq, temperature):
    dp = np.asarray(dp, dtype=float)
    dq = np.asarray(dq, dtype=float)
    out = np.zeros((len(dp), len(dq)))
    for i in range(len(dp)):
        for j in range(len(dq)):
            out[i, j] = float(np.dot(dp[i], dq[j])) / temperature
    return out


def mutual_argmax_pairs(assignment, threshold, has_dustbin=False):
    a = np.asarray(assignment, dtype=float)
    m, n = a.shape
    m_real = m - 1 if has_dustbin else m
    n_real = n - 1 if has_dustbin else n
    pairs = []
    for i in range(m_real):
        j = int(np.argmax(a[i]))
        if j >= n_real:
            continue
        if int(np.argmax(a[:, j])) == i and a[i, j] >= threshold:
            pairs.append((i, j))
    return pairs


def nll_direct(assignment, gt_pairs):
    a = np.asarray(assignment, dtype=float)
    total = 0.0
    for i, j in gt_pairs:
        total += -math.log(min(max(a[i, j], 1e-12), 1.0))
    return total / len(gt_pairs)


def point_triangle_distance(points, a, b, c):
    """Distance from each point to triangle (a, b, c).

    Closest point is either the in-triangle plane projection or a point on one
    of the three edges; taking the minimum over all four candidates is exact.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)

    def seg_dist(p, s0, s1):
        d = s1 - s0
        denom = float(d @ d)
        if denom == 0.0:
            return np.linalg.norm(p - s0, axis=1)
        t = np.clip((p - s0) @ d / denom, 0.0, 1.0)
        proj = s0 + t[:, None] * d
        return np.linalg.norm(p - proj, axis=1)

    n = np.cross(b - a, c - a)
    nn = float(n @ n)
    best = np.minimum(seg_dist(p, a, b),
                      np.minimum(seg_dist(p, b, c), seg_dist(p, c, a)))
    if nn > 0:
        dist_plane = (p - a) @ n / math.sqrt(nn)
        proj = p - dist_plane[:, None] * (n / math.sqrt(nn))
        # barycentric test of the projected points
        v0, v1 = b - a, c - a
        v2 = proj - a
        d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
        d20 = v2 @ v0
        d21 = v2 @ v1
        denom = d00 * d11 - d01 * d01
        if denom != 0:
            w1 = (d11 * d20 - d01 * d21) / denom
            w2 = (d00 * d21 - d01 * d20) / denom
            inside = (w1 >= 0) & (w2 >= 0) & (w1 + w2 <= 1)
            plane = np.abs(dist_plane)
            best = np.where(inside, np.minimum(best, plane), best)
    return best


def point_mesh_distance(points, vertices, triangles, chunk=64):
    """Min distance from each point to any triangle of the mesh."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    verts = np.asarray(vertices, dtype=float)
    best = np.full(len(p), np.inf)
    for tri in np.asarray(triangles, dtype=int):
        d = point_triangle_distance(p, verts[tri[0]], verts[tri[1]], verts[tri[2]])
        best = np.minimum(best, d)
    return best


def bilinear_direct(texture, u, v):
    """Scalar bilinear lookup at continuous (u, v) with corner alignment."""
    tex = np.asarray(texture, dtype=float)
    h, w = tex.shape[:2]
    x = min(max(u, 0.0), 1.0) * (w - 1)
    y = min(max(v, 0.0), 1.0) * (h - 1)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    return (tex[y0, x0] * (1 - fx) * (1 - fy) + tex[y0, x1] * fx * (1 - fy)
            + tex[y1, x0] * (1 - fx) * fy + tex[y1, x1] * fx * fy)
