"""CPLEX LP text export."""

from __future__ import annotations

from .model import EQ, MAXIMIZE, LPModel

_LINE = 200


def _num(v: float) -> str:
    return repr(float(v))


def _terms(model: LPModel, coeffs: dict[int, float]) -> list[str]:
    out = []
    for k, (i, c) in enumerate(sorted(coeffs.items())):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = model.var_names[i] if mag == 1.0 else f"{_num(mag)} {model.var_names[i]}"
        out.append(f"{sign} {body}" if k or c < 0 else body)
    return out


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for t in terms + ([tail] if tail else []):
        if len(cur) + len(t) + 1 > _LINE:
            lines.append(cur)
            cur = "   "
        cur = f"{cur} {t}"
    lines.append(cur)
    return lines


def export_lp_text(model: LPModel) -> str:
    """Render ``model`` as an LP file (Objective / Subject To / Bounds / End)."""
    lines = [f"\\ {model.name}", "Maximize" if model.sense == MAXIMIZE else "Minimize"]
    terms = _terms(model, model.objective)
    if not terms and model.n_vars:
        terms = [f"0 {model.var_names[0]}"]
    lines += _wrap(" obj:", terms)
    if model.constraints:
        lines.append("Subject To")
        for con in model.constraints:
            rel = "=" if con.rel == EQ else con.rel
            terms = _terms(model, con.coeffs) or [f"0 {model.var_names[0]}"]
            lines += _wrap(f" {con.name}:", terms, f"{rel} {_num(con.rhs)}")
    lines.append("Bounds")
    for i, name in enumerate(model.var_names):
        lo, hi = model.lower[i], model.upper[i]
        if hi is None:
            lines.append(f" {name} >= {_num(lo)}")
        elif hi == lo:
            lines.append(f" {name} = {_num(lo)}")
        else:
            lines.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    lines.append("End")
    return "\n".join(lines) + "\n"
