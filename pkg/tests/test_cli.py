import json

import jsonschema
import numpy as np
import pytest

from penrose_rw.cli import main
from penrose_rw.pipeline import BUNDLE_SCHEMA, RunConfig
from penrose_rw.tiling import Patch

SMALL = ["--seed", "42", "--radius", "150", "--n", "200", "--walks", "5000",
         "--ladder", "50,100,200", "--ns", "10,20", "--no-figures"]


def test_generate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["generate", "--seed", "7", "--radius", "20", "--out", str(a)]) == 0
    assert main(["generate", "--seed", "7", "--radius", "20", "--out", str(b), "--no-svg"]) == 0
    assert (a / "patch.json").read_bytes() == (b / "patch.json").read_bytes()
    assert (a / "patch.svg").exists() and not (b / "patch.svg").exists()
    out = capsys.readouterr().out
    assert "thick/thin" in out and "reproduce: penrose-rw generate --seed 7" in out
    p = Patch.from_json((a / "patch.json").read_text())
    verts = np.loadtxt(a / "vertices.csv", delimiter=",", skiprows=1, usecols=(1, 2))
    assert np.array_equal(verts, p.centers)


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["generate", "--radius", "0.5", "--out", str(tmp_path)])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["verify", "--n", "-3"])
    assert e.value.code == 2


def test_render(tmp_path):
    d = tmp_path / "g"
    main(["generate", "--seed", "3", "--radius", "25", "--out", str(d), "--no-svg"])
    assert main(["corrector", "--seed", "3", "--radius", "25", "--out", str(d), "--ns", "5,10",
                 "--epsilons", "1,0.1", "--no-figures", "--no-svg"]) == 0
    for mode in ("shape", "class", "chi"):
        out = tmp_path / f"{mode}.svg"
        args = ["render", str(d / "patch.json"), "--color-by", mode, "-o", str(out)]
        if mode == "chi":
            args += ["--corrector", str(d / "chi.csv")]
        assert main(args) == 0
        text = out.read_text()
        assert text.startswith("<svg") and text.count("<polygon") == len(Patch.from_json((d / "patch.json").read_text()))


def test_corrector_outputs(tmp_path):
    d = tmp_path / "c"
    assert main(["corrector", "--seed", "42", "--radius", "60", "--out", str(d), "--ns", "10,20"]) == 0
    for name in ("chi.csv", "sublinearity_n.csv", "sublinearity_k.csv", "resolvent_scan.csv",
                 "sublinearity.png", "resolvent_scan.png", "chi.svg"):
        assert (d / name).exists(), name


def test_walk_and_estimate(tmp_path, capsys):
    d = tmp_path / "w"
    assert main(["walk", "--seed", "42", "--radius", "120", "--n", "100", "--walks", "200",
                 "--out", str(d)]) == 0
    summary = json.loads((d / "batch.json").read_text())
    assert summary == {"master_seed": 1, "n": 100, "walk_count": 200, "abort_count": 0}
    assert len((d / "endpoints.csv").read_text().splitlines()) == 201
    code = main(["estimate-d", "--seed", "42", "--radius", "150", "--n", "300", "--walks", "3000",
                 "--out", str(d)])
    assert code in (0, 1)
    assert (d / "diffusion.csv").exists() and (d / "endpoints.png").exists()
    # patch too small for n
    assert main(["walk", "--seed", "42", "--radius", "30", "--n", "5000", "--walks", "10",
                 "--out", str(d)]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = RunConfig(seed=5, radius=20.0, out=str(tmp_path / "x"))
    cfg.save(tmp_path / "cfg.json")
    assert main(["generate", "--config", str(tmp_path / "cfg.json"), "--seed", "6", "--no-svg"]) == 0
    p = json.loads((tmp_path / "x" / "patch.json").read_text())
    assert p["params"]["seed"] == 6
    (tmp_path / "bad.json").write_text('{"sed": 1}')
    with pytest.raises(SystemExit) as e:
        main(["generate", "--config", str(tmp_path / "bad.json")])
    assert e.value.code == 2


def _verify(tmp_path, name, extra=(), capsys=None):
    code = main(["verify", *SMALL, "--out", str(tmp_path / name), "--json", *extra])
    bundle = json.loads(capsys.readouterr().out)
    return code, bundle


def test_verify_json_schema_and_determinism(tmp_path, capsys):
    c1, b1 = _verify(tmp_path, "v", capsys=capsys)
    c2, b2 = _verify(tmp_path, "v", capsys=capsys)
    jsonschema.validate(b1, BUNDLE_SCHEMA)
    assert c1 == c2 == (0 if b1["all_pass"] else 1)
    b1.pop("generated_at"), b2.pop("generated_at")
    assert b1 == b2
    saved = json.loads((tmp_path / "v" / "verdict.json").read_text())
    jsonschema.validate(saved, BUNDLE_SCHEMA)
    names = [r["name"] for r in b1["reports"]]
    assert "corrector harmonicity residual" in names and "gaussianity" in names


def test_verify_zero_chi_fails(tmp_path, capsys):
    code, bundle = _verify(tmp_path, "z", ["--zero-chi"], capsys=capsys)
    assert code == 1 and not bundle["all_pass"]
    res = [r for r in bundle["reports"] if r["name"] == "corrector harmonicity residual"][0]
    assert not res["verdict"]
