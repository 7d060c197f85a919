import json

import numpy as np
import pytest

from alamp.errors import DigestMismatch, MissingLabelInfo, NotFound, ParseError, VersionMismatch
from alamp.harness import checkpoint
from alamp.harness.manifest import load_manifest
from alamp.harness.metrics import Metrics, confusion
from alamp.harness.pipeline import PipelineConfig, evaluate, score_image
from alamp.net import ExtractorSpec, ModelConfig, TrainConfig, init_params, train, zero_params
from alamp.net.model import ModelParams
from alamp.synthetic import toy_dataset, write_dataset

# --- manifest ------------------------------------------------------------


def write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_label_rule_boundary(tmp_path):
    entries = load_manifest(write(tmp_path, "path,mean_rating\na.png,5.0\nb.png,5.1\nc.png,4.99\nd.png,9\n"))
    assert [e.label for e in entries] == ["low", "high", "low", "high"]
    assert entries[0].path == str(tmp_path / "a.png")


def test_explicit_label_wins(tmp_path):
    entries = load_manifest(write(tmp_path, "path,mean_rating,label\na.png,8.0,low\nb.png,,high\nc.png,2,\n"))
    assert [e.label for e in entries] == ["low", "high", "low"]
    assert entries[1].mean_rating is None


def test_missing_label_info(tmp_path):
    with pytest.raises(MissingLabelInfo):
        load_manifest(write(tmp_path, "path,mean_rating,label\na.png,,\n"))


@pytest.mark.parametrize(
    "text",
    [
        "file,rating\na.png,3\n",
        "path,mean_rating\na.png,abc\n",
        'path,mean_rating\n"a,b.png",3\n',
        "path,mean_rating\na.png,3,low,extra\n",
        "path,mean_rating,label\na.png,3,medium\n",
        "",
    ],
)
def test_manifest_parse_errors(tmp_path, text):
    with pytest.raises(ParseError):
        load_manifest(write(tmp_path, text))


def test_manifest_not_found(tmp_path):
    with pytest.raises(NotFound):
        load_manifest(tmp_path / "none.csv")


# --- metrics -------------------------------------------------------------


def test_metrics_arithmetic():
    m = Metrics(tp=2, fp=1, tn=6, fn=1)
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(2 / 3)
    assert m.f_measure == pytest.approx(2 / 3)
    assert m.accuracy == pytest.approx(0.8)


def test_metrics_perfect_and_degenerate():
    m = confusion([True, False, True], [True, False, True])
    assert m.accuracy == 1.0 and m.f_measure == 1.0
    assert Metrics(0, 0, 5, 0).f_measure == 0.0


# --- checkpoints ---------------------------------------------------------

CFG = ModelConfig(ExtractorSpec("tiny_conv", K=8, input_side=8), k_stat=4, m=3)


def test_checkpoint_roundtrip_bit_identical(tmp_path, rng):
    params = init_params(CFG, rng)
    back = checkpoint.checkpoint_roundtrip(params, tmp_path / "a.ck")
    assert back.equals(params)
    first = (tmp_path / "a.ck").read_bytes()
    checkpoint.save(back, tmp_path / "b.ck")
    assert (tmp_path / "b.ck").read_bytes() == first


def test_checkpoint_keeps_stage_and_extra(tmp_path, rng):
    params = init_params(CFG, rng, stage="fused")
    checkpoint.save(params, tmp_path / "a.ck", extra={"pipeline": {"solver": "greedy"}})
    back, extra = checkpoint.load(tmp_path / "a.ck")
    assert back.stage == "fused"
    assert extra == {"pipeline": {"solver": "greedy"}}


def test_checkpoint_header_is_ascii(rng):
    data = checkpoint.encode(init_params(CFG, rng))
    header = data[: data.index(b"\nend\n")].decode("ascii")
    assert header.startswith("ALAMP-CKPT\nversion 1\ndigest ")


def test_checkpoint_truncated(tmp_path, rng):
    data = checkpoint.encode(init_params(CFG, rng))
    for cut in (5, 40, len(data) - 3):
        (tmp_path / "t.ck").write_bytes(data[:cut])
        with pytest.raises(ParseError):
            checkpoint.load(tmp_path / "t.ck")


def test_checkpoint_version_mismatch(tmp_path, rng):
    data = checkpoint.encode(init_params(CFG, rng)).replace(b"version 1", b"version 9", 1)
    (tmp_path / "v.ck").write_bytes(data)
    with pytest.raises(VersionMismatch):
        checkpoint.load(tmp_path / "v.ck")


def test_checkpoint_digest_mismatch(tmp_path, rng):
    checkpoint.save(init_params(CFG, rng), tmp_path / "a.ck")
    other = ModelConfig(ExtractorSpec("tiny_conv", K=8, input_side=8), k_stat=5, m=3)
    with pytest.raises(DigestMismatch):
        checkpoint.load(tmp_path / "a.ck", expect=other)


def test_checkpoint_missing(tmp_path):
    with pytest.raises(NotFound):
        checkpoint.load(tmp_path / "none.ck")


def test_trained_params_roundtrip(tmp_path, rng):
    from alamp.net import Example

    data = [Example(rng.integers(0, 256, (3, 8, 8, 3), dtype=np.uint8), rng.random(34), k % 2) for k in range(8)]
    params = train(data, CFG, TrainConfig(epochs=2, batch_size=4), "mp_only")
    assert checkpoint.checkpoint_roundtrip(params, tmp_path / "t.ck").equals(params)


# --- evaluation ----------------------------------------------------------

HAND = ModelConfig(ExtractorSpec("handcrafted", K=64, input_side=32), k_stat=8, m=3)


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    write_dataset(root, toy_dataset(10, seed=5))
    return root


def test_zero_model_accuracy_is_high_fraction(toy_dir):
    entries = load_manifest(toy_dir / "manifest.csv")
    result = evaluate(zero_params(HAND), entries, PipelineConfig())
    high = sum(e.label == "high" for e in entries)
    assert all(s == 0.5 for s in result.scores.values())
    assert result.metrics.accuracy == high / len(entries)
    assert (result.metrics.tp, result.metrics.fp) == (high, len(entries) - high)


def test_evaluate_order_invariant_and_matches_score(toy_dir, rng):
    entries = load_manifest(toy_dir / "manifest.csv")
    params = init_params(HAND, rng, stage="fused")
    a = evaluate(params, entries, PipelineConfig())
    b = evaluate(params, entries[::-1], PipelineConfig(), threads=3)
    assert a.metrics == b.metrics
    assert a.scores == b.scores
    e = entries[3]
    assert score_image(params, e.path, PipelineConfig()) == a.scores[e.path]


def test_evaluate_skip_errors(toy_dir, tmp_path):
    text = (toy_dir / "manifest.csv").read_text() + f"{tmp_path / 'missing.png'},7,\n"
    manifest = tmp_path / "m.csv"
    manifest.write_text(text.replace("img0", str(toy_dir / "img0")))
    entries = load_manifest(manifest)
    with pytest.raises(NotFound):
        evaluate(zero_params(HAND), entries, PipelineConfig())
    result = evaluate(zero_params(HAND), entries, PipelineConfig(), skip_errors=True)
    assert result.skipped == 1
    assert result.metrics.total == 10
    assert result.to_json()["skipped"] == 1


def test_hand_scored_confusion(toy_dir):
    """A layout-only model whose predictions can be worked out by hand."""
    entries = load_manifest(toy_dir / "manifest.csv")
    params = zero_params(HAND)
    t = dict(params.tensors)
    # logit = 10 * (overlap of the single local edge) - 5: overlapping boxes -> high
    t["head.w"][HAND.k_stat + 2] = 10.0
    t["head.b"] = np.array([-5.0])
    params = ModelParams(HAND, t, params.velocity, "fused")
    result = evaluate(params, entries, PipelineConfig())
    expected_pred = {}
    for e in entries:
        dets = json.loads(open(e.path + ".dets.json").read())
        a, b = dets
        iw = max(0, min(a["x"] + a["w"], b["x"] + b["w"]) - max(a["x"], b["x"]))
        ih = max(0, min(a["y"] + a["h"], b["y"] + b["h"]) - max(a["y"], b["y"]))
        ov = iw * ih / min(a["w"] * a["h"], b["w"] * b["h"])
        expected_pred[e.path] = 10 * ov - 5 >= 0
    tp = sum(expected_pred[e.path] and e.label == "high" for e in entries)
    fp = sum(expected_pred[e.path] and e.label == "low" for e in entries)
    tn = sum(not expected_pred[e.path] and e.label == "low" for e in entries)
    fn = sum(not expected_pred[e.path] and e.label == "high" for e in entries)
    assert (result.metrics.tp, result.metrics.fp, result.metrics.tn, result.metrics.fn) == (tp, fp, tn, fn)
