"""Configuration parsing and validation."""

import dataclasses
import math

import numpy as np
import pytest

from geomech.config import ExperimentConfig, config_defaults, parse_config
from geomech.errors import BadValue, MissingKey, ParseError


def test_minimal_simulate_config():
    cfg = parse_config(
        "experiment = simulate\nmodel = mass_spring\nh = 0.035\nt_final = 10\n"
    )
    assert cfg.experiment == "simulate"
    assert cfg.model == "mass_spring"
    assert cfg.integrator == "vi"
    assert cfg.h == 0.035
    assert cfg.horizon == 10.0
    assert cfg.seed == 0
    assert cfg.out_dir == "."
    assert cfg["mass"] == 1.0
    assert cfg["q0"] == math.sqrt(2.0)


def test_comments_blank_lines_and_spacing():
    cfg = parse_config(
        "# flagship oscillator\n"
        "\n"
        "experiment=simulate\n"
        "  model =  mass_spring  \n"
        "h = 0.01\n"
        "t_final = 1\n"
        "q0 = 2.5\n"
    )
    assert cfg["q0"] == 2.5


def test_malformed_line_reports_its_number():
    text = "experiment = simulate\nmodel = planar\nwhat is this\nh = 0.1\nt_final = 1\n"
    with pytest.raises(ParseError, match="line 3"):
        parse_config(text)
    with pytest.raises(ParseError, match="empty key"):
        parse_config("experiment = simulate\n = 5\n")


def test_duplicate_key_rejected():
    text = "experiment = simulate\nmodel = planar\nh = 0.1\nh = 0.2\nt_final = 1\n"
    with pytest.raises(ParseError, match="line 4: duplicate key 'h'"):
        parse_config(text)


def test_unknown_key_rejected():
    text = "experiment = simulate\nmodel = mass_spring\nh = 0.1\nt_final = 1\nfrequency = 3\n"
    with pytest.raises(ParseError, match="unknown key 'frequency'"):
        parse_config(text)
    # keys from another experiment do not leak in
    with pytest.raises(ParseError, match="unknown key 'n_steps'"):
        parse_config("experiment = simulate\nmodel = planar\nh = 0.1\nt_final = 1\nn_steps = 5\n")


def test_missing_keys():
    with pytest.raises(MissingKey, match="experiment"):
        parse_config("h = 0.1\n")
    with pytest.raises(MissingKey, match="'t_final'"):
        parse_config("experiment = simulate\nmodel = planar\nh = 0.1\n")
    with pytest.raises(MissingKey, match="'n_steps'"):
        parse_config("experiment = clag\nh = 0.05\n")
    with pytest.raises(MissingKey, match="'model'"):
        parse_config("experiment = simulate\nh = 0.1\nt_final = 1\n")


def test_bad_values_report_line_and_reason():
    base = "experiment = simulate\nmodel = mass_spring\nt_final = 1\n"
    with pytest.raises(BadValue, match="line 4: h: must be positive"):
        parse_config(base + "h = -0.1\n")
    with pytest.raises(BadValue, match="expected a number"):
        parse_config(base + "h = fast\n")
    with pytest.raises(BadValue, match="must be finite"):
        parse_config(base + "h = inf\n")
    with pytest.raises(BadValue, match="seed: must be a nonnegative"):
        parse_config(base + "h = 0.1\nseed = -2\n")
    with pytest.raises(BadValue, match="experiment: expected one of"):
        parse_config("experiment = banana\n")
    with pytest.raises(BadValue, match="expected three numbers"):
        parse_config(
            "experiment = simulate\nmodel = spherical\nh = 0.1\nt_final = 1\nq0 = 1 0\n"
        )


def test_spherical_direction_normalized_and_rate_tangentized():
    cfg = parse_config(
        "experiment = simulate\nmodel = spherical\nh = 0.05\nt_final = 1\n"
        "q0 = 0.6 0.0 0.8000001\nomega0 = -0.07999994 0.2 0.06000008\n"
    )
    assert abs(np.linalg.norm(cfg["q0"]) - 1.0) < 1e-15
    assert abs(cfg["omega0"] @ cfg["q0"]) < 1e-15
    with pytest.raises(BadValue, match="unit length"):
        parse_config(
            "experiment = simulate\nmodel = spherical\nh = 0.05\nt_final = 1\nq0 = 2 0 0\n"
        )
    with pytest.raises(BadValue, match="orthogonal"):
        parse_config(
            "experiment = simulate\nmodel = spherical\nh = 0.05\nt_final = 1\n"
            "omega0 = 0 0 0.3\n"
        )


def test_quaternion_route_requires_rigid_body():
    with pytest.raises(BadValue, match="rk45-quat"):
        parse_config(
            "experiment = simulate\nmodel = planar\nintegrator = rk45-quat\n"
            "h = 0.1\nt_final = 1\n"
        )
    cfg = parse_config(
        "experiment = simulate\nmodel = rigid_body\nintegrator = rk45-quat\n"
        "h = 0.05\nt_final = 1\nrtol = 1e-3\natol = 1e-6\n"
    )
    assert cfg.integrator == "rk45-quat"
    assert cfg["rtol"] == 1e-3
    # tolerance keys are only meaningful for the adaptive routes
    with pytest.raises(ParseError, match="unknown key 'rtol'"):
        parse_config(
            "experiment = simulate\nmodel = rigid_body\nh = 0.05\nt_final = 1\nrtol = 1e-3\n"
        )


def test_dmoc_config_and_endpoint_validation():
    cfg = parse_config("experiment = dmoc\nh = 0.033\nn_steps = 30\n")
    assert cfg.model == "spherical"
    assert cfg.integrator == "vi"
    assert cfg.horizon == 30
    assert np.array_equal(cfg["q_des"], [0.0, 0.0, -1.0])
    assert cfg["tol_constraint"] == 1e-6
    assert cfg["max_inner"] == 600
    with pytest.raises(BadValue, match="q_des: must be unit length"):
        parse_config("experiment = dmoc\nh = 0.033\nn_steps = 30\nq_des = 0 0 -2\n")


def test_shoot_config_defaults():
    cfg = parse_config("experiment = shoot\nh = 0.1\nn_steps = 50\n")
    assert cfg.model == "rigid_body"
    assert cfg["mu"] == 1.0
    assert np.array_equal(cfg["rho1"], [0.5, 0.0, 0.0])
    assert cfg["tol"] == 1e-12
    assert cfg["max_iter"] == 40


def test_clag_config_gain_choices():
    cfg = parse_config("experiment = clag\nh = 0.05\nn_steps = 2000\n")
    assert cfg.model == "cart_pendulum"
    assert cfg["kappa"] is None
    assert cfg["kappa_factor"] == 2.0
    direct = parse_config("experiment = clag\nh = 0.05\nn_steps = 100\nkappa = 11.0\n")
    assert direct["kappa"] == 11.0


def test_config_is_frozen_with_seed_override():
    cfg = parse_config("experiment = clag\nh = 0.05\nn_steps = 10\nseed = 3\n")
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.seed = 7
    other = cfg.with_seed(7)
    assert other.seed == 7
    assert cfg.seed == 3
    assert other.params is cfg.params
    assert isinstance(other, ExperimentConfig)


def test_defaults_table():
    d = config_defaults("dmoc")
    assert d["h"] == "required"
    assert d["n_steps"] == "required"
    assert d["rho0"] == 10.0
    sim = config_defaults("simulate", "planar")
    assert sim["length"] == 9.81
    assert sim["model"] == "required"
    with pytest.raises(BadValue):
        config_defaults("optimize")
