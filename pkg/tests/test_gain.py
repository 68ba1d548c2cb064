import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntcons.errors import InvalidInput
from ntcons.gain import GainSpec, Target, eval_gain, parse_gain, validate_gain


def closed_form(alpha):
    """Textbook calculus for (1+t)^-alpha: p-integral thresholds."""
    return alpha <= 1, alpha > 0, 2 * alpha > 1


@given(st.floats(0, 3))
@settings(max_examples=200)
def test_power_flags_match_calculus(alpha):
    r = validate_gain(GainSpec.power(1.0, alpha))
    assert (r.divergent_integral, r.vanishing, r.square_integrable) == closed_form(alpha)
    a = validate_gain(GainSpec.power(1.0, alpha), Target.ALMOST_SURE)
    if a.passed:
        assert r.passed


@given(st.floats(0.01, 10), st.floats(0, 3))
@settings(max_examples=50)
def test_power_gain_is_non_increasing(c0, alpha):
    t = np.linspace(0, 50, 501)
    assert np.all(np.diff(eval_gain(GainSpec.power(c0, alpha), t)) <= 0)


@pytest.mark.parametrize("text, ms, as_", [
    ("power:c0=1,alpha=1", True, True),
    ("power:c0=1,alpha=2", False, False),
    ("power:c0=1,alpha=1/3", True, False),
    ("const:c0=1", False, False),
])
def test_truth_table(text, ms, as_):
    g = parse_gain(text)
    assert validate_gain(g, Target.MEAN_SQUARE).passed is ms
    assert validate_gain(g, Target.ALMOST_SURE).passed is as_


def test_eval_and_parse():
    g = parse_gain("power:c0=2,alpha=0.5")
    assert eval_gain(g, 3.0) == pytest.approx(1.0)
    assert g(0.0) == 2.0
    assert eval_gain(parse_gain("const:c0=0.7"), [0.0, 9.0]).tolist() == [0.7, 0.7]
    for bad in ("power:c0=1,beta=2", "power:alpha", "cosine:c0=1", "power:c0=-1"):
        with pytest.raises(InvalidInput):
            parse_gain(bad)
    with pytest.raises(InvalidInput):
        eval_gain(g, -1.0)


def test_table_gain_is_heuristic(tmp_path):
    t = np.linspace(0, 1000, 2001)
    path = tmp_path / "gain.csv"
    path.write_text("t,c\n" + "".join(f"{float(a)!r},{1 / (1 + float(a))!r}\n" for a in t))
    g = parse_gain(f"table:{path}")
    assert eval_gain(g, 1.0) == pytest.approx(0.5, abs=1e-3)
    r = validate_gain(g)
    assert not r.analytic and r.passed is None
    assert r.divergent_integral and r.vanishing and r.square_integrable
    fast = GainSpec.table(t, (1 + t) ** -2.0)
    assert not validate_gain(fast).divergent_integral


def test_bad_table_row_names_line(tmp_path):
    from ntcons.errors import ParseError
    path = tmp_path / "bad.csv"
    path.write_text("t,c\n0,1\n1,oops\n")
    with pytest.raises(ParseError, match=r"bad.csv:3"):
        parse_gain(f"table:{path}")
