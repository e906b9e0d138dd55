"""Config parsing and the four command entry points."""

import warnings

import numpy as np
import pytest

from helpers import damage, square_mask, stripes_image
from nlch import ImageGray, read_pgm, write_pgm
from nlch.cli import (ConfigError, dispatch, normalize_config, parse_config)


# ---------------------------------------------------------------------------
# config parsing


def test_defaults_from_empty_text():
    config = parse_config("")
    assert config["dim"] == 2
    assert config["nx"] == 64
    assert config["bc"] == "periodic"
    assert config["dt"] is None
    assert config["probe_amplitudes"] == (0.1, 1.0, 5.0)
    assert not config.was_provided("nx")


def test_parse_tracks_provided_keys():
    config = parse_config("dt = 1e-3\nt_end = 0.5\n")
    assert config["dt"] == 1e-3
    assert config.was_provided("dt")
    assert not config.was_provided("cadence")


def test_parse_comments_and_blanks():
    config = parse_config("# full line\n\nnx = 32  # trailing\n")
    assert config["nx"] == 32


def test_parse_unknown_key():
    with pytest.raises(ConfigError, match="line 2: unknown key 'spam'"):
        parse_config("nx = 16\nspam = 1\n")


def test_parse_duplicate_key():
    with pytest.raises(ConfigError,
                       match="duplicate key 'dt' on lines 1 and 3"):
        parse_config("dt = 1e-3\nnx = 16\ndt = 2e-3\n")


def test_parse_type_errors():
    with pytest.raises(ConfigError, match="line 1: nx: expected an integer"):
        parse_config("nx = tiny\n")
    with pytest.raises(ConfigError, match="line 1: dt: expected a number"):
        parse_config("dt = fast\n")
    with pytest.raises(ConfigError, match="expected one of"):
        parse_config("bc = absorbing\n")
    with pytest.raises(ConfigError, match="expected 'auto' or a number"):
        parse_config("stabilization_s = loose\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config("just words\n")


def test_parse_float_list():
    config = parse_config("probe_amplitudes = 0.25,2,7.5\n")
    assert config["probe_amplitudes"] == (0.25, 2.0, 7.5)
    with pytest.raises(ConfigError, match="comma-separated"):
        parse_config("probe_amplitudes = 0.1;5\n")


def test_normalize_is_a_parse_fixed_point():
    config = parse_config("dt = 1e-3\nt_end = 0.5\nnx = 32\nny = 32\n"
                          "probe_amplitudes = 0.1,1\n")
    text = normalize_config(config)
    again = parse_config(text)
    assert again == config
    assert normalize_config(again) == text


# ---------------------------------------------------------------------------
# dispatch scaffolding


def write_config(tmp_path, text, name="job.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


RUN_CFG = """\
nx = 16
ny = 16
lx = 2.0
ly = 2.0
dt = 1e-3
t_end = 5e-3
cadence = 2
initial_amplitude = 0.05
"""


def test_unknown_command_and_flags(capsys):
    assert dispatch(["simulate"]) == 64
    assert "unknown command" in capsys.readouterr().err
    assert dispatch(["run", "--fast"]) == 64
    assert "unknown flag" in capsys.readouterr().err
    assert dispatch(["run", "--config"]) == 64
    assert "needs a value" in capsys.readouterr().err
    assert dispatch(["run", "--out", "a", "--out", "b"]) == 64
    assert "given twice" in capsys.readouterr().err
    assert dispatch([]) == 64


def test_help_exits_clean(capsys):
    assert dispatch(["help"]) == 0
    out = capsys.readouterr().out
    assert "usage: nlch" in out
    assert "run | inpaint | check | probe" in out


def test_missing_config_file(capsys):
    assert dispatch(["run", "--config", "/no/such/file.cfg"]) == 64
    assert "cannot read config" in capsys.readouterr().err


def test_missing_required_key(tmp_path, capsys):
    cfg = write_config(tmp_path, "t_end = 1.0\n")
    assert dispatch(["run", "--config", cfg]) == 64
    assert "missing required key 'dt'" in capsys.readouterr().err


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path, RUN_CFG)
    out = tmp_path / "out"
    assert dispatch(["run", "--config", cfg, "--out", str(out)]) == 0
    assert "stopped by t_end" in capsys.readouterr().out

    csv_text = (out / "diagnostics.csv").read_text()
    data_rows = [ln for ln in csv_text.splitlines()
                 if ln and not ln.startswith("#") and not ln.startswith("t,")]
    assert len(data_rows) == 4  # steps 0, 2, 4, 5
    assert "# nlch " in csv_text
    assert "output_dir" not in csv_text
    for step in (0, 2, 4, 5):
        assert (out / f"snap_{step:08d}.nlch1").exists()

    effective = (out / "effective.cfg").read_text()
    assert normalize_config(parse_config(effective)) == effective


def test_run_with_zero_horizon_emits_one_row(tmp_path):
    cfg = write_config(tmp_path, RUN_CFG.replace("t_end = 5e-3", "t_end = 0"))
    out = tmp_path / "zero"
    assert dispatch(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = [ln for ln in (out / "diagnostics.csv").read_text().splitlines()
            if ln and not ln.startswith("#") and not ln.startswith("t,")]
    assert len(rows) == 1
    assert rows[0].startswith("0,")


def test_run_outputs_are_bit_identical(tmp_path):
    cfg = write_config(tmp_path, RUN_CFG)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert dispatch(["run", "--config", cfg, "--out", str(out)]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()
    assert (a / "snap_00000005.nlch1").read_bytes() == (b / "snap_00000005.nlch1").read_bytes()


def test_run_divergence_exits_1(tmp_path, capsys):
    # fidelity reaction far above its explicit cap amplifies step by step
    _, _, img_path, mask_path = write_scene(tmp_path)
    cfg = write_config(tmp_path, (
        "nx = 32\nny = 32\nlx = 32\nly = 32\neps = 3.0\nbc = neumann\n"
        "model = chbeg\nlambda0 = 1e6\ndt = 1e-2\nt_end = 10\n"
        "stabilization_s = 0\n"), name="boom.cfg")
    out = tmp_path / "boom"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        code = dispatch(["run", "--config", cfg, "--image", img_path,
                         "--mask", mask_path, "--out", str(out)])
    assert code == 1
    assert "diverged" in capsys.readouterr().err


def test_check_passes_at_defaults(capsys):
    assert dispatch(["check"]) == 0
    out = capsys.readouterr().out
    for name in ("H1", "H2", "H3", "H4", "H9", "I8"):
        assert name in out


def test_check_fails_for_weak_kernel(tmp_path, capsys):
    cfg = write_config(tmp_path, "amplitude = 0.5\n")
    assert dispatch(["check", "--config", cfg]) == 2
    out = capsys.readouterr().out
    assert "H2" in out


def test_probe_small_scenario(tmp_path, capsys):
    cfg = write_config(tmp_path, (
        "nx = 16\nny = 16\nlx = 2.0\nly = 2.0\nsigma = 1.0\n"
        "dt = 1e-2\nt_end = 1.0\nprobe_amplitudes = 0.1,1\n"))
    assert dispatch(["probe", "--config", cfg]) == 0
    assert "common band" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# inpaint command


def write_scene(tmp_path):
    truth = stripes_image(32, 32, 8)
    mask = square_mask(32, 32, 6)
    broken = damage(truth, mask)
    img_path = tmp_path / "broken.pgm"
    mask_path = tmp_path / "mask.pgm"
    write_pgm(img_path, broken)
    write_pgm(mask_path, ImageGray(
        32, 32, np.where(mask.damaged, 0, 255).astype(np.uint8)))
    return truth, mask, str(img_path), str(mask_path)


def test_inpaint_command_restores(tmp_path, capsys):
    truth, mask, img_path, mask_path = write_scene(tmp_path)
    cfg = write_config(tmp_path, "dt = 1e-3\n")
    out = tmp_path / "restored"
    code = dispatch(["inpaint", "--config", cfg, "--image", img_path,
                     "--mask", mask_path, "--out", str(out)])
    assert code == 0
    assert "steady after" in capsys.readouterr().out
    restored = read_pgm(out / "restored.pgm")
    assert np.array_equal(restored.pixels[~mask.damaged],
                          truth.pixels[~mask.damaged])
    agree = np.mean(restored.pixels[mask.damaged] == truth.pixels[mask.damaged])
    assert agree >= 0.99
    assert (out / "phi_final.nlch1").exists()
    assert (out / "effective.cfg").exists()


def test_inpaint_requires_image_and_mask(tmp_path, capsys):
    cfg = write_config(tmp_path, "dt = 1e-3\n")
    assert dispatch(["inpaint", "--config", cfg]) == 64
    assert "needs --image and --mask" in capsys.readouterr().err


def test_inpaint_dimension_mismatch_exits_64(tmp_path, capsys):
    _, _, img_path, _ = write_scene(tmp_path)
    small = tmp_path / "small_mask.pgm"
    write_pgm(small, ImageGray(16, 16, np.full((16, 16), 255, np.uint8)))
    cfg = write_config(tmp_path, "dt = 1e-3\n")
    code = dispatch(["inpaint", "--config", cfg, "--image", img_path,
                     "--mask", str(small)])
    assert code == 64
    err = capsys.readouterr().err
    assert "32 x 32" in err and "16 x 16" in err


def test_inpaint_non_convergence_exits_1(tmp_path, capsys):
    _, _, img_path, mask_path = write_scene(tmp_path)
    cfg = write_config(tmp_path, "dt = 1e-3\nmax_steps = 10\n")
    out = tmp_path / "partial"
    code = dispatch(["inpaint", "--config", cfg, "--image", img_path,
                     "--mask", mask_path, "--out", str(out)])
    assert code == 1
    assert "without reaching steady_tol" in capsys.readouterr().err
    assert (out / "restored.pgm").exists()
