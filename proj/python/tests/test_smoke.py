import base64
import json

import numpy as np
import pytest

import sdgan


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "tiny"
    config = {
        "model": {"family": "sd-dcgan", "k": 2, "d_i": 50, "resolution": 32},
        "optim": {"total_iterations": 2, "batch_tuples": 4},
        "dataset": {"glyphs": {"shapes": 2, "hues": 2, "per_identity": 4, "seed": 3}},
        "seed": 5,
        "output_dir": str(out),
    }
    return sdgan.train(config)


def test_msssim_of_identical_images_is_one():
    x = np.random.default_rng(0).uniform(-1, 1, (3, 32, 32)).astype(np.float32)
    assert sdgan.msssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_calibration_picks_the_separating_midpoint():
    tau, acc = sdgan.calibrate_threshold([0.1, 0.2, 0.9, 1.0], [1, 1, 0, 0])
    assert tau == pytest.approx(0.55)
    assert acc == 1.0
    assert sdgan.roc_auc([-0.1, -0.2, -0.9, -1.0], [1, 1, 0, 0]) == 1.0


def test_lerp_endpoints_are_exact():
    zi, zo = sdgan.sample_code(seed=1)
    zi2, zo2 = sdgan.sample_code(seed=2)
    path = sdgan.lerp({"z_i": zi, "z_o": zo}, {"z_i": zi2, "z_o": zo2}, 3, "identity")
    assert path[0]["z_i"] == zi and path[-1]["z_i"] == zi2
    assert all(p["z_o"] == zo for p in path)


def test_glyph_dataset_shape():
    ds = sdgan.make_glyphs(shapes=2, hues=3, per_identity=4, resolution=32, seed=0)
    assert len(ds) == 6
    for images in ds.values():
        assert images.shape == (4, 3, 32, 32)
        assert images.min() >= -1.0 and images.max() <= 1.0


def test_reference_tables_and_bottleneck():
    report = sdgan.conformance_report({"family": "sd-began", "k": 2, "d_i": 50, "resolution": 32, "loss": "began"})
    assert report["passed"], report
    counts = sdgan.parameter_counts({"family": "sd-dcgan", "k": 2, "d_i": 50, "resolution": 64})
    assert counts["mem_bytes"] == 4 * (counts["generator"] + counts["discriminator"])


def test_generate_grid_and_invert(checkpoint):
    model = sdgan.Model(checkpoint)
    assert model.iteration == 2
    zi, zo = sdgan.sample_code(seed=9)
    img = model.generate(np.array([zi + zo], dtype=np.float32))
    assert img.shape == (1, 3, 32, 32)
    grid = model.grid(rows=2, cols=3, seed=4)
    assert grid.shape == (2, 3, 3, 32, 32)
    np.testing.assert_array_equal(grid, model.grid(rows=2, cols=3, seed=4))
    before = model.parameter_hash
    result = model.invert(img[0], steps=5, restarts=2)
    assert result["iterations_used"] == 5
    assert model.parameter_hash == before


def test_service_handlers(checkpoint):
    service = sdgan.InferenceService(checkpoint)
    meta = json.loads(service.meta()["body"])
    assert meta["d_i"] == 50 and meta["d_o"] == 50
    zi, _ = sdgan.sample_code(seed=1)
    r = service.sample(json.dumps({"z_I": zi, "observation_seed": 3, "count": 2}))
    assert r["status"] == 200
    body = json.loads(r["body"])
    assert len(body["images"]) == 2
    assert all(c["z_i"] == pytest.approx(zi) for c in body["codes"])
    assert base64.b64decode(body["images"][0])[:8] == b"\x89PNG\r\n\x1a\n"
    assert service.sample(json.dumps({"z_I": zi, "observation_seed": 3, "count": 0}))["status"] == 400
    png = service.grid({"rows": "2", "cols": "2", "seed": "1"})
    assert png["content_type"] == "image/png"
