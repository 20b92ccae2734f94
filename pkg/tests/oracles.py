"""Independent reference computations used by the test suite.

Nothing here imports the code under test beyond plain data types.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

# Bell vectors in the |00>,|01>,|10>,|11> basis, ordered (Phi+, Psi-, Psi+, Phi-).
_S = 1 / np.sqrt(2)
BELL = [
    np.array([_S, 0, 0, _S]),
    np.array([0, _S, -_S, 0]),
    np.array([0, _S, _S, 0]),
    np.array([_S, 0, 0, -_S]),
]

_I = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def bell_diagonal_rho(coeffs):
    return sum(c * np.outer(v, v.conj()) for c, v in zip(coeffs, BELL)).astype(complex)


def _kron(*ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def _cnot(n, control, target):
    dim = 2**n
    u = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n - 1 - q) for q, b in enumerate(bits))
        u[j, i] = 1
    return u


def dejmps_tensor(coeffs):
    """Brute-force DEJMPS round on two copies; qubit order A1 B1 A2 B2.

    Alice rotates her qubits by exp(-i pi X / 4), Bob by exp(+i pi X / 4),
    both apply CNOT (copy 1 controls copy 2), the copy-2 qubits are measured
    in Z and the round succeeds when the outcomes agree.  Returns
    ``(fidelity, success_probability)`` of copy 1 with respect to Phi+.
    """
    rho1 = bell_diagonal_rho(coeffs)
    # rho1 acts on (A1,B1); rho2 on (A2,B2) -> kron gives order A1 B1 A2 B2
    rho = np.kron(rho1, rho1)
    ua = (_I - 1j * _X) / np.sqrt(2)
    ub = (_I + 1j * _X) / np.sqrt(2)
    rot = _kron(ua, ub, ua, ub)
    cn = _cnot(4, 0, 2) @ _cnot(4, 1, 3)
    u = cn @ rot
    rho = u @ rho @ u.conj().T
    p_succ = 0.0
    kept = np.zeros((4, 4), dtype=complex)
    for outcome in range(16):
        bits = [(outcome >> (3 - q)) & 1 for q in range(4)]
        if bits[2] != bits[3]:
            continue
        p = rho[outcome, outcome].real
        if p <= 0:
            continue
        p_succ += p
    # trace out copy 2 keeping only agreeing outcomes
    for m in (0, 1):
        idx = [i for i in range(16) if ((i >> 1) & 1) == m and (i & 1) == m]
        block = rho[np.ix_(idx, idx)]
        kept += block
    kept /= p_succ
    phi = BELL[0]
    fid = float((phi.conj() @ kept @ phi).real)
    return fid, float(p_succ)


def werner_coeffs(f):
    r = (1 - f) / 3
    return (f, r, r, r)


def bfs_distance(adj, src, dst):
    seen = {src: 0}
    q = deque([src])
    while q:
        x = q.popleft()
        if x == dst:
            return seen[x]
        for y in adj[x]:
            if y not in seen:
                seen[y] = seen[x] + 1
                q.append(y)
    return None


def vertex_enumeration(c, rows, sense="max"):
    """Brute-force LP oracle over x >= 0.

    ``rows`` is a list of ``(a, rel, b)``.  Enumerates every basic solution
    (n active constraints out of rows + sign bounds), and detects
    unboundedness by maximising ``c.d`` over normalised recession
    directions.  Returns ``(status, objective)``.
    """
    c = np.asarray(c, float)
    n = len(c)
    sgn = 1.0 if sense == "max" else -1.0
    ineq = []  # G x <= h
    eqs = []
    for a, rel, b in rows:
        a = np.asarray(a, float)
        if rel == "<=":
            ineq.append((a, b))
        elif rel == ">=":
            ineq.append((-a, -b))
        else:
            eqs.append((a, b))
    for i in range(n):
        e = np.zeros(n)
        e[i] = -1
        ineq.append((e, 0.0))

    def feasible(x, tol=1e-9):
        return all(a @ x <= b + tol for a, b in ineq) and all(
            abs(a @ x - b) <= tol for a, b in eqs
        )

    def best_vertex(ineq_, eqs_, obj):
        best = None
        k = n - len(eqs_)
        if k < 0:
            k = 0
        for combo in itertools.combinations(range(len(ineq_)), k):
            mat = [a for a, _ in eqs_] + [ineq_[i][0] for i in combo]
            rhs = [b for _, b in eqs_] + [ineq_[i][1] for i in combo]
            mat = np.array(mat).reshape(-1, n)
            rhs = np.array(rhs)
            if np.linalg.matrix_rank(mat) < n:
                continue
            x, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
            if not np.allclose(mat @ x, rhs, atol=1e-9):
                continue
            if all(a @ x <= b + 1e-9 for a, b in ineq_) and all(
                abs(a @ x - b) <= 1e-9 for a, b in eqs_
            ):
                v = obj @ x
                if best is None or v > best:
                    best = v
        return best

    best = best_vertex(ineq, eqs, sgn * c)
    if best is None:
        return "infeasible", None
    # recession cone: G d <= 0, E d = 0, d >= 0, sum d = 1
    rin = [(a, 0.0) for a, _ in ineq]
    req = [(a, 0.0) for a, _ in eqs] + [(np.ones(n), 1.0)]
    ray = best_vertex(rin, req, sgn * c)
    if ray is not None and ray > 1e-9:
        return "unbounded", None
    return "optimal", sgn * best


def parse_lp_text(text):
    """Minimal independent reader for the LP-file subset the exporter writes.

    Returns ``(sense, objective, rows, bounds)`` with coefficient dicts keyed
    by variable name; ``rows`` holds ``(name, coeffs, rel, rhs)``.
    """
    section = None
    sense = None
    objective = {}
    rows = []
    bounds = {}
    stmt = []

    def terms(tokens):
        out = {}
        sign, coef = 1.0, None
        for tok in tokens:
            if tok in "+-":
                sign = -1.0 if tok == "-" else 1.0
                continue
            try:
                coef = float(tok)
                continue
            except ValueError:
                pass
            out[tok] = out.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
        return out

    def flush():
        if not stmt:
            return
        tokens = " ".join(stmt).split()
        stmt.clear()
        name = tokens[0].rstrip(":")
        body = tokens[1:]
        if section == "obj":
            objective.update(terms(body))
            return
        rel_at = next(i for i, t in enumerate(body) if t in ("<=", ">=", "="))
        rows.append((name, terms(body[:rel_at]), body[rel_at], float(body[rel_at + 1])))

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("maximize", "minimize"):
            sense = low[:3]
            section = "obj"
            continue
        if low in ("subject to", "bounds", "end"):
            flush()
            section = {"subject to": "st", "bounds": "bounds", "end": None}[low]
            continue
        if section in ("obj", "st"):
            if raw.startswith("    ") and stmt:
                stmt.append(line)
            else:
                flush()
                stmt.append(line)
        elif section == "bounds":
            tok = line.split()
            if len(tok) == 3 and tok[1] == ">=":
                bounds[tok[0]] = (float(tok[2]), None)
            elif len(tok) == 3 and tok[1] == "=":
                bounds[tok[0]] = (float(tok[2]), float(tok[2]))
            elif len(tok) == 5:
                bounds[tok[2]] = (float(tok[0]), float(tok[4]))
            else:
                raise ValueError(f"unreadable bound {line!r}")
    return sense, objective, rows, bounds
