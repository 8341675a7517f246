import json

import pytest

from lobmix.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, load_config, main, UsageError

TOML = """
seed = 2
[generator]
signal_strength = 0.4
[dataset]
m = 6
tau = 1.0
stride = 4
[net]
state_size = 4
dense_width = 4
embed_dim = 2
[train]
max_epochs = 1
[sim]
K = 10
T = 20
[benchmark]
n_paths = 30
"""


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(TOML)
    return p


def test_load_config_overrides(cfg_path):
    cfg = load_config(str(cfg_path), ["net.state_size=9", "dataset.price_reference=last_trade",
                                      "new.table.flag=true", "generator.buy_limit_rates=[1, 2]"])
    assert cfg["net"]["state_size"] == 9
    assert cfg["dataset"]["price_reference"] == "last_trade"
    assert cfg["new"]["table"]["flag"] is True
    assert cfg["generator"]["buy_limit_rates"] == [1, 2]
    with pytest.raises(UsageError):
        load_config(None, ["novalue"])


def test_usage_errors(tmp_path, cfg_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["generate", "--config", str(cfg_path), "--set", "generator.bogus=1",
                 "--out", str(tmp_path / "x.ndjson")]) == EXIT_USAGE
    assert main(["generate", "--config", str(cfg_path), "--set", "generator.signal_strength=2",
                 "--out", str(tmp_path / "x.ndjson")]) == EXIT_USAGE
    bad = tmp_path / "bad.toml"
    bad.write_text("[net\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x.ndjson")]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert main(["--version"]) == EXIT_OK


def test_io_errors(tmp_path, cfg_path):
    assert main(["build", "--config", str(cfg_path), "--stream", str(tmp_path / "missing.ndjson"),
                 "--out-dir", str(tmp_path / "d")]) == EXIT_IO
    junk = tmp_path / "junk.ndjson"
    junk.write_text("not json\n")
    assert main(["build", "--config", str(cfg_path), "--stream", str(junk),
                 "--out-dir", str(tmp_path / "d")]) == EXIT_IO
    assert main(["train", "--config", str(cfg_path), "--data-dir", str(tmp_path / "nowhere"),
                 "--head", "poisson", "--out", str(tmp_path / "c.lmx")]) == EXIT_IO


def test_full_pipeline(tmp_path, cfg_path, monkeypatch):
    monkeypatch.setenv("LOBMIX_OUTPUT_DIR", str(tmp_path / "out"))
    monkeypatch.chdir(tmp_path)
    c = ["--config", str(cfg_path)]
    assert main(["generate", *c, "--out", "a.ndjson", "--duration", "120"]) == 0
    meta = json.loads((tmp_path / "out" / "a.ndjson.meta.json").read_text())
    assert meta["command"] == "generate" and meta["seed"] == 2 and "config_hash" in meta
    s = str(tmp_path / "out" / "a.ndjson")
    assert main(["build", *c, "--stream", s, "--out-dir", "data"]) == 0
    data = str(tmp_path / "out" / "data")
    assert main(["train", *c, "--data-dir", data, "--head", "negbin", "--out", "ck/nb.lmx"]) == 0
    assert main(["train", *c, "--data-dir", data, "--head", "nope", "--out", "ck/x.lmx"]) == EXIT_USAGE
    ck = str(tmp_path / "out" / "ck" / "nb.lmx")
    assert main(["train", *c, "--data-dir", data, "--resume", ck, "--epochs", "1", "--out", "ck/nb2.lmx"]) == 0
    log = (tmp_path / "out" / "ck" / "nb2.log.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in log if ln[:1].isdigit()] == ["1", "2"]
    assert main(["fit-benchmark", *c, "--kind", "glm", "--data-dir", data, "--out", "glm.json"]) == 0
    assert main(["fit-benchmark", *c, "--kind", "birth_death", "--data-dir", data, "--out", "bd.json"]) == 0
    glm = str(tmp_path / "out" / "glm.json")
    bd = str(tmp_path / "out" / "bd.json")
    assert main(["evaluate", *c, "--data-dir", data, "--checkpoint", f"nb={ck}", "--benchmark", f"glm={glm}",
                 "--benchmark", f"bd={bd}", "--stream", s, "--baseline", "glm", "--out-dir", "rep"]) == 0
    rep = json.loads((tmp_path / "out" / "rep" / "report.json").read_text())
    assert set(rep["models"]) == {"nb", "glm", "bd"}
    assert rep["meta"]["command"] == "evaluate"
    assert main(["evaluate", *c, "--data-dir", data, "--checkpoint", f"nb={ck}", "--baseline", "glm",
                 "--out-dir", "rep"]) == EXIT_USAGE
    assert main(["simulate", *c, "--data-dir", data, "--checkpoint", f"nb={ck}", "--benchmark", f"glm={glm}",
                 "--out-dir", "sim"]) == 0
    tt = json.loads((tmp_path / "out" / "sim" / "ttests.json").read_text())
    assert tt["tests"][0]["model"] == "nb" and tt["config"]["K"] == 10
