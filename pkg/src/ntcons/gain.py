"""Time-varying control gains ``c(t)`` and the integral conditions they must meet.

Mean-square consensus asks for a gain whose integral diverges while the gain
itself vanishes; almost-sure consensus additionally asks for a
square-integrable gain.  Power laws ``c0 (1 + t)^-alpha`` are classified
exactly; tabulated gains only get a horizon-limited numerical report.
"""

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInput, ParseError


class Target(enum.Enum):
    MEAN_SQUARE = "mean-square"
    ALMOST_SURE = "almost-sure"


@dataclass(frozen=True, eq=False)
class GainSpec:
    family: str
    c0: float = 1.0
    alpha: float = 0.0
    table_t: Optional[np.ndarray] = None
    table_c: Optional[np.ndarray] = None
    description: str = ""

    @classmethod
    def power(cls, c0=1.0, alpha=1.0):
        if not c0 > 0 or not alpha >= 0:
            raise InvalidInput(f"power gain needs c0 > 0 and alpha >= 0, got c0={c0}, alpha={alpha}")
        return cls("power", float(c0), float(alpha), description=f"power:c0={c0:g},alpha={alpha:g}")

    @classmethod
    def constant(cls, c0=1.0):
        if not c0 >= 0:
            raise InvalidInput("constant gain must be non-negative")
        return cls("const", float(c0), description=f"const:c0={c0:g}")

    @classmethod
    def table(cls, t, c, description="table"):
        t = np.asarray(t, dtype=float)
        c = np.asarray(c, dtype=float)
        if t.ndim != 1 or t.shape != c.shape or t.size < 2:
            raise InvalidInput("gain table needs matching 1-D columns with at least two rows")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("gain table times must increase strictly")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise InvalidInput("gain table values must be finite and non-negative")
        return cls("table", table_t=t, table_c=c, description=description)

    def __call__(self, t):
        return eval_gain(self, t)


def eval_gain(g, t):
    """Evaluate the gain at ``t >= 0`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInput("gain is defined for t >= 0 only")
    if g.family == "power":
        out = g.c0 * (1.0 + t) ** (-g.alpha)
    elif g.family == "const":
        out = np.full_like(t, g.c0)
    else:
        out = np.interp(t, g.table_t, g.table_c)
    return float(out) if out.ndim == 0 else out


def parse_gain(text):
    """Parse ``power:c0=1,alpha=1``, ``const:c0=1`` or ``table:<csv path>``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "table":
        return load_gain_table(rest)
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InvalidInput(f"gain parameter {item!r} is not key=value")
        params[key.strip()] = _number(value)
    if kind == "power":
        unknown = set(params) - {"c0", "alpha"}
        if unknown:
            raise InvalidInput(f"unknown power gain parameters {sorted(unknown)}")
        return GainSpec.power(params.get("c0", 1.0), params.get("alpha", 1.0))
    if kind in ("const", "constant"):
        unknown = set(params) - {"c0"}
        if unknown:
            raise InvalidInput(f"unknown constant gain parameters {sorted(unknown)}")
        return GainSpec.constant(params.get("c0", 1.0))
    raise InvalidInput(f"unknown gain family {kind!r}")


def _number(text):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def load_gain_table(path):
    """Two-column ``t,c`` CSV with an optional header and ``#`` comments."""
    try:
        with open(path, newline="") as fh:
            rows = [(n, r) for n, r in enumerate(csv.reader(fh), 1)
                    if r and not r[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    if rows and not _is_number(rows[0][1][0]):
        rows = rows[1:]
    t, c = [], []
    for n, r in rows:
        if len(r) < 2 or not (_is_number(r[0]) and _is_number(r[1])):
            raise ParseError(f"{path}:{n}: expected two numbers, got {','.join(r)!r}")
        t.append(float(r[0]))
        c.append(float(r[1]))
    return GainSpec.table(t, c, description=f"table:{Path(path).name}")


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


@dataclass
class ConditionReport:
    divergent_integral: bool
    vanishing: bool
    square_integrable: bool
    analytic: bool
    target: Target
    notes: list = field(default_factory=list)

    @property
    def mean_square(self):
        if not self.analytic:
            return None
        return self.divergent_integral and self.vanishing

    @property
    def almost_sure(self):
        if not self.analytic:
            return None
        return self.divergent_integral and self.vanishing and self.square_integrable

    @property
    def passed(self):
        return self.mean_square if self.target is Target.MEAN_SQUARE else self.almost_sure

    def as_dict(self):
        return {
            "divergent_integral": self.divergent_integral,
            "vanishing": self.vanishing,
            "square_integrable": self.square_integrable,
            "analytic": self.analytic,
            "target": self.target.value,
            "mean_square": self.mean_square,
            "almost_sure": self.almost_sure,
            "passed": self.passed,
            "notes": list(self.notes),
        }


def validate_gain(g, target=Target.MEAN_SQUARE):
    """Evaluate the three integral conditions for a gain.

    For ``c0 (1 + t)^-alpha``: the integral diverges iff ``alpha <= 1``, the
    gain vanishes iff ``alpha > 0`` and it is square integrable iff
    ``alpha > 1/2``.  Tables get the same thresholds applied to a power-law
    exponent fitted to the last half of their support; being horizon-limited,
    they never receive a pass or fail verdict.
    """
    target = Target(target)
    if g.family == "power":
        return ConditionReport(g.alpha <= 1.0, g.alpha > 0.0, g.alpha > 0.5, True, target)
    if g.family == "const":
        if g.c0 == 0.0:
            return ConditionReport(False, True, True, True, target, ["zero gain never couples the agents"])
        return ConditionReport(True, False, False, True, target)

    t, c = g.table_t, g.table_c
    tail = t >= t[0] + 0.5 * (t[-1] - t[0])
    if np.any(c[tail] == 0.0):
        # switched off for good within the table: every integral is finite
        return ConditionReport(False, True, True, False, target,
                               [f"heuristic: gain reaches zero before t={t[-1]:g}"])
    alpha = round(tail_exponent(t[tail], c[tail]), 3)
    notes = [
        f"heuristic, horizon-limited to [{t[0]:g}, {t[-1]:g}]",
        f"integral of c = {np.trapezoid(c, t):.4g}, of c^2 = {np.trapezoid(c * c, t):.4g} over the table",
        f"tail decays like (1+t)^-{alpha:g}",
    ]
    return ConditionReport(alpha <= 1.0, alpha > 0.0, alpha > 0.5, False, target, notes)


def tail_exponent(t, c):
    """Least-squares ``alpha`` in ``c ~ (1 + t)^-alpha`` on a log-log scale."""
    slope = np.polyfit(np.log1p(t), np.log(c), 1)[0]
    return float(-slope)
