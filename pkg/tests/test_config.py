import pytest
from hypothesis import given, settings, strategies as st

from wavedecay.coefficients import FAMILIES, wiggle_amplitude_for_lip
from wavedecay.config import ConfigError, RunConfig, load_config, parse_config, serialize, with_parameter
from wavedecay.diagnostics.suite import AUDITS, DEFAULT_AUDITS
from wavedecay.initial_data import PRESETS


def test_empty_coefficient_section_uses_defaults():
    cfg = parse_config("[coefficient]\nfamily = constant\nk0 = 1\n")
    assert cfg == RunConfig()
    assert cfg.audits == DEFAULT_AUDITS
    assert cfg.radius == 2.0


def test_gamma0_range_rejected_with_location():
    with pytest.raises(ConfigError) as exc:
        parse_config("[coefficient]\ngamma0 = 1.0\n")
    assert exc.value.key == "gamma0" and exc.value.line == 2
    assert "[0, 1)" in str(exc.value)


def test_R_must_exceed_r0():
    with pytest.raises(ConfigError) as exc:
        parse_config("[solver]\nR = 1\n[coefficient]\nr0 = 2\n")
    assert exc.value.key == "R" and exc.value.line == 2


@pytest.mark.parametrize("text", [
    "[solver]\ndx = 0\n",
    "[solver]\ncfl = 1.0\n",
    "[solver]\nspeed = 3\n",
    "[solver]\ndx = 0.1\ndx = 0.2\n",
    "dx = 0.1\n",
    "[extra]\nx = 1\n",
    "[solver]\ndx\n",
    "[solver]\ndx = abc\n",
    "[coefficient]\nfamily = cubic\n",
    "[data]\npreset = spiral\n",
    "[audits]\nnonsense = true\n",
    "[audits]\nvirial_inequality = maybe\n",
    "[coefficient]\nlip = 0.1\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_lip_key_sets_amplitude():
    cfg = parse_config("[coefficient]\nfamily = lipschitz\nlip = 0.14\n")
    assert cfg.amplitude == pytest.approx(wiggle_amplitude_for_lip(0.14, 2.0), rel=1e-15)


def test_audit_toggles():
    cfg = parse_config("[audits]\nfinite_propagation = true\nvirial_inequality = false\n")
    assert "finite_propagation" in cfg.audits and "virial_inequality" not in cfg.audits
    assert list(cfg.audits) == [a for a in AUDITS if a in cfg.audits]


def test_comments_and_blank_lines(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\n\n[solver]\nT_max = 3  # short\n")
    assert load_config(p).T_max == 3.0


def test_with_parameter():
    cfg = RunConfig()
    assert with_parameter(cfg, "gamma0", "0.25").gamma0 == 0.25
    assert with_parameter(cfg, "solver.dx", "0.1").dx == 0.1
    assert with_parameter(cfg, "data.amplitude", "2").data_amplitude == 2.0
    with pytest.raises(ConfigError):
        with_parameter(cfg, "amplitude", "2")  # ambiguous between sections
    with pytest.raises(ConfigError):
        with_parameter(cfg, "gamma0", "1.5")


@settings(max_examples=60, deadline=None)
@given(
    dx=st.floats(0.01, 0.5), cfl=st.floats(0.05, 0.95), T=st.floats(0, 500), L=st.floats(0.1, 3),
    family=st.sampled_from(FAMILIES), gamma0=st.floats(0, 0.99), preset=st.sampled_from(PRESETS),
    stride=st.integers(1, 50), audits=st.sets(st.sampled_from(list(AUDITS))),
    R=st.one_of(st.none(), st.floats(5.0, 20.0)),
)
def test_round_trip(dx, cfl, T, L, family, gamma0, preset, stride, audits, R):
    cfg = RunConfig(L=L, R=R, T_max=T, dx=dx, cfl=cfl, stride=stride, family=family, gamma0=gamma0,
                    preset=preset, audits=tuple(a for a in AUDITS if a in audits))
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)
