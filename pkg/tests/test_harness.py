import csv

import numpy as np
import pytest

from unidnn import cli
from unidnn.harness.classify import run_classifier_eval, write_accuracy_csv, write_confusion_csv
from unidnn.harness.config import CONVENTIONAL, NEURAL, dump_config, load_config, make_config
from unidnn.harness.dataset import DatasetFormatError, LabeledDataset, generate_dataset
from unidnn.harness.imaging import read_pgm, run_image_demo, synthetic_image, write_pgm
from unidnn.harness.pipeline import find_classifier, gen_datasets, load_bundles, train_all
from unidnn.harness.sweep import (CSV_HEADER, BerPoint, read_ber_csv, resolve_methods, run_ber_sweep,
                                  run_point, write_ber_csv)
from unidnn.harness.timing import run_timing
from unidnn.phy import StructureError
from unidnn.receivers import bit_error_rate


def tiny(tmp_path, **kw):
    base = dict(m=600, epochs=2, batch_size=100, n_hid=16, work_dir=str(tmp_path), snr_list=[10.0, 20.0],
                bit_budget=20_000, timing_trials=50, classify_samples=200, m_h=200)
    base.update(kw)
    return make_config("fast", **base)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    scn = tiny(tmp_path_factory.mktemp("trained"))
    return scn, train_all(scn)


class TestDataset:
    def test_same_seed_same_bytes(self, tmp_path):
        scn = tiny(tmp_path, m=300)
        generate_dataset(scn).save(tmp_path / "a.unidnn")
        generate_dataset(scn).save(tmp_path / "b.unidnn")
        assert (tmp_path / "a.unidnn").read_bytes() == (tmp_path / "b.unidnn").read_bytes()

    def test_streams_differ(self, tmp_path):
        scn = tiny(tmp_path, m=50)
        assert not np.array_equal(generate_dataset(scn, stream=0).features,
                                  generate_dataset(scn, stream=1).features)

    def test_round_trip(self, tmp_path):
        ds = generate_dataset(tiny(tmp_path, m=40, n_pilots=16))
        ds.save(tmp_path / "d.unidnn")
        back = LabeledDataset.load(tmp_path / "d.unidnn")
        for name in ("features", "labels", "class_labels", "snr"):
            np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))
        assert (back.n_pilots, back.snr_policy, back.snr_bounds) == (16, "uniform", (0.0, 20.0))

    def test_bad_magic(self, tmp_path):
        ds = generate_dataset(tiny(tmp_path, m=5))
        ds.save(tmp_path / "d.unidnn")
        raw = bytearray((tmp_path / "d.unidnn").read_bytes())
        raw[:4] = b"XXXX"
        (tmp_path / "d.unidnn").write_bytes(bytes(raw))
        with pytest.raises(DatasetFormatError, match="magic"):
            LabeledDataset.load(tmp_path / "d.unidnn")

    def test_truncated(self, tmp_path):
        generate_dataset(tiny(tmp_path, m=5)).save(tmp_path / "d.unidnn")
        raw = (tmp_path / "d.unidnn").read_bytes()
        (tmp_path / "d.unidnn").write_bytes(raw[:-8])
        with pytest.raises(DatasetFormatError):
            LabeledDataset.load(tmp_path / "d.unidnn")

    def test_labels(self, tmp_path):
        ds = generate_dataset(tiny(tmp_path, m=100), classes=["AwgnOnly"])
        assert np.all(ds.class_index == 4)
        assert ds.labels.shape == (100, 112)
        assert set(np.unique(ds.labels)) <= {0.0, 1.0}
        assert ds.snr.min() >= 0.0 and ds.snr.max() <= 20.0

    def test_fixed_snr(self, tmp_path):
        ds = generate_dataset(tiny(tmp_path, m=10, snr_policy="fixed", snr_db=7.0))
        np.testing.assert_array_equal(ds.snr, 7.0)
        assert ds.snr_bounds == (7.0, 7.0)


class TestConfig:
    def test_fast_profile(self):
        scn = make_config("fast")
        assert (scn.m, scn.epochs, scn.n_hid) == (20000, 150, 256)

    def test_full_defaults(self):
        scn = make_config("full")
        assert (scn.m, scn.epochs, scn.n_hid, scn.batch_size) == (100000, 700, 512, 3000)
        assert scn.learning_rate == 1e-3 and scn.l2 == 2e-6 and scn.train_fraction == 0.7

    def test_yaml_overrides_profile(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("profile: fast\nm: 1234\nsnr_list: [0, 10]\n")
        scn = load_config(path, seed=5)
        assert (scn.m, scn.epochs, scn.seed, scn.snr_list) == (1234, 150, 5, [0, 10])

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("learning_rat: 0.1\n")
        with pytest.raises(ValueError, match="learning_rat"):
            load_config(path)

    def test_dump_round_trip(self, tmp_path):
        scn = make_config("fast", m=77, classes=["Rayleigh", "TdlA"])
        path = tmp_path / "c.yaml"
        path.write_text(dump_config(scn))
        assert load_config(path) == scn

    @pytest.mark.parametrize("bad", [dict(snr_range=(0.0, 30.0)), dict(n_pilots=7), dict(routing="x"),
                                     dict(classes=["EPA"]), dict(snr_policy="fixed", snr_db=-3.0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            make_config("fast", **bad)


class TestSweep:
    def test_csv(self, tmp_path):
        pts = [BerPoint("LS", "Rayleigh", 8, 10.0, 3, 1000), BerPoint("True", "Mixed", 8, 0.0, 50, 2000)]
        write_ber_csv(pts, tmp_path / "b.csv")
        with open(tmp_path / "b.csv") as fh:
            assert next(csv.reader(fh)) == CSV_HEADER
        rows = read_ber_csv(tmp_path / "b.csv")
        assert rows[0] == {"method": "LS", "channel": "Rayleigh", "np": 8, "snr_db": 10.0, "ber": 0.003,
                           "bits": 1000}
        assert rows[1]["ber"] == 0.025

    def test_bound_flag(self):
        assert BerPoint("True", "AwgnOnly", 8, 20.0, 0, 10_000_000).bound
        assert not BerPoint("True", "AwgnOnly", 8, 0.0, 10, 10_000).bound

    def test_budget_exhausted_gives_bound(self, tmp_path):
        scn = tiny(tmp_path, bit_budget=5000)
        (p,) = run_point(scn, "AwgnOnly", 0, 20.0, ["True"], {})
        assert p.errors == 0 and p.bound
        assert 5000 <= p.bits < 5000 + 112

    def test_stops_after_min_errors(self, tmp_path):
        scn = tiny(tmp_path, bit_budget=10_000_000, batch_symbols=100)
        (p,) = run_point(scn, "Rayleigh", 0, 0.0, ["LS"], {})
        assert p.errors >= 10 and p.bits == 11_200

    def test_ls_no_better_than_true(self, tmp_path):
        scn = tiny(tmp_path, bit_budget=200_000)
        for ch in ("Rayleigh", "Winner2"):
            res = {p.method: p for p in run_point(scn, ch, 0, 10.0, ["True", "LS"], {})}
            assert res["True"].bits == res["LS"].bits
            assert res["LS"].ber >= res["True"].ber

    def test_common_random_numbers(self, tmp_path):
        scn = tiny(tmp_path, bit_budget=20_000)
        a = run_point(scn, "Rician", 0, 10.0, ["LS"], {})[0]
        b = [p for p in run_point(scn, "Rician", 0, 10.0, ["True", "LS"], {}) if p.method == "LS"][0]
        assert (a.errors, a.bits) == (b.errors, b.bits)

    def test_ber_decreases_with_snr(self, tmp_path):
        scn = tiny(tmp_path, bit_budget=100_000)
        pts = run_ber_sweep(scn, methods=["LS"], channels=["Rayleigh"], snr_list=[0.0, 10.0, 20.0])
        bers = [p.ber for p in pts]
        assert bers[0] > bers[1] > bers[2]

    def test_resolve(self, trained):
        _, bundles = trained
        tags = [m for m, _ in resolve_methods(CONVENTIONAL + NEURAL, "Mixed", bundles)]
        assert "Single" not in tags and len(tags) == 8
        tags = [m for m, _ in resolve_methods(CONVENTIONAL + NEURAL, "Rician", bundles)]
        assert tags == CONVENTIONAL + NEURAL
        with pytest.raises(StructureError, match="UniB"):
            resolve_methods(["UniB"], "Rician", {})
        with pytest.raises(StructureError):
            resolve_methods(["ZF"], "Rician", {})

    def test_every_method(self, trained):
        scn, bundles = trained
        pts = run_ber_sweep(scn, bundles, channels=["Rician", "Mixed"], snr_list=[20.0])
        got = {(p.method, p.channel) for p in pts}
        assert {(m, "Rician") for m in CONVENTIONAL + NEURAL} <= got
        assert ("Single", "Mixed") not in got
        assert all(0.0 <= p.ber <= 1.0 and p.bits > 0 for p in pts)

    def test_missing_bundle_fails_fast(self, tmp_path):
        with pytest.raises(StructureError):
            run_ber_sweep(tiny(tmp_path), {}, methods=["LS", "UniC"], channels=["Rician"])


class TestImaging:
    def test_pgm_round_trip(self, tmp_path):
        img = synthetic_image(32)
        write_pgm(img, tmp_path / "i.pgm")
        assert (tmp_path / "i.pgm").read_bytes()[:2] == b"P5"
        np.testing.assert_array_equal(read_pgm(tmp_path / "i.pgm"), img)

    def test_unreadable(self, tmp_path):
        (tmp_path / "x.pgm").write_bytes(b"not an image")
        with pytest.raises(OSError):
            read_pgm(tmp_path / "x.pgm")

    @pytest.mark.parametrize("method", ["True", "LS"])
    def test_noiseless_awgn_is_lossless(self, tmp_path, method):
        img = synthetic_image(16)
        out, ber = run_image_demo(img, method, None, "AwgnOnly", tiny(tmp_path))
        assert ber == 0.0
        np.testing.assert_array_equal(out, img)

    def test_reported_ber_is_payload_ber(self, tmp_path):
        img = synthetic_image(16)
        out, ber = run_image_demo(img, "LS", 5.0, "Rayleigh", tiny(tmp_path))
        assert ber > 0
        assert ber == bit_error_rate(np.unpackbits(img.ravel()), np.unpackbits(out.ravel()))

    def test_neural_method(self, trained):
        scn, bundles = trained
        img = synthetic_image(8)
        out, ber = run_image_demo(img, "UniA", 20.0, "TdlA", scn, bundles)
        assert out.shape == img.shape and out.dtype == np.uint8 and 0.0 <= ber <= 1.0


class TestClassify:
    def test_confusion_rows(self, trained, tmp_path):
        scn, bundles = trained
        mats = run_classifier_eval(scn, find_classifier(bundles), snr_list=[0.0, 20.0], n_samples=300)
        assert set(mats) == {0.0, 20.0}
        for mat in mats.values():
            assert mat.shape == (5, 5)
            np.testing.assert_allclose(mat.sum(axis=1), 1.0, atol=1e-9)
        write_confusion_csv(mats, tmp_path / "c.csv")
        write_accuracy_csv(mats, tmp_path / "a.csv")
        with open(tmp_path / "c.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 10
        assert sum(float(v) for v in rows[1][2:]) == pytest.approx(1.0, abs=1e-5)
        with open(tmp_path / "a.csv") as fh:
            assert len(list(csv.reader(fh))) == 1 + 2 * 6

    def test_single_has_no_classifier(self, trained):
        _, bundles = trained
        assert find_classifier({k: v for k, v in bundles.items() if k.startswith("Single")}) is None


class TestTiming:
    def test_ratios_stable(self, trained):
        scn, bundles = trained
        pick = {k: bundles[k] for k in ("Multi", "UniC")}
        a = run_timing(scn, pick, n_trials=300).ratios()
        b = run_timing(scn, pick, n_trials=300).ratios()
        assert a["LS"] == b["LS"] == 1.0
        for k in ("MMSE", "Multi", "UniC"):
            assert 1 / 3 <= a[k] / b[k] <= 3

    def test_conventional_only(self, tmp_path):
        rep = run_timing(tiny(tmp_path), n_trials=50)
        assert list(rep.seconds) == ["LS", "MMSE"]
        assert all(v > 0 for v in rep.seconds.values())


class TestPipeline:
    def test_bundle_names(self, trained):
        _, bundles = trained
        assert set(bundles) == {"Single-Rayleigh", "Single-Rician", "Single-TdlA", "Single-Winner2",
                                "Single-AwgnOnly", "Multi", "UniA", "UniB", "UniC"}

    def test_shared_classifier(self, trained):
        _, bundles = trained
        assert bundles["UniA"].classifier is bundles["UniB"].classifier is bundles["UniC"].classifier

    def test_reload(self, trained):
        scn, bundles = trained
        back = load_bundles(scn)
        assert set(back) == set(bundles)
        y = np.ones((3, 64), complex)
        np.testing.assert_array_equal(back["UniB"].classifier.predict(np.ones((1, 128))),
                                      bundles["UniB"].classifier.predict(np.ones((1, 128))))
        assert back["UniC"].detector.output_width == 112 and y.shape == (3, 64)

    def test_missing_bundle_message(self, tmp_path):
        with pytest.raises(StructureError, match="run `train` first"):
            load_bundles(tiny(tmp_path), ["UniC"])

    def test_gen_datasets_files(self, tmp_path):
        scn = tiny(tmp_path, m=50, archs=["Single", "UniA"], single_classes=["Rician"])
        out = gen_datasets(scn)
        assert set(out) == {"mixed", "Rician"}
        assert np.all(out["Rician"].class_index == 1)
        assert (tmp_path / "np8" / "data" / "mixed.unidnn").exists()


def run_cli(*argv):
    assert cli.main(list(argv)) == 0


class TestCli:
    @pytest.fixture
    def config(self, tmp_path):
        path = tmp_path / "scn.yaml"
        path.write_text("profile: fast\nm: 400\nepochs: 2\nbatch_size: 100\nn_hid: 8\nm_h: 100\n"
                        "snr_list: [10, 20]\nbit_budget: 5000\ntiming_trials: 30\nclassify_samples: 100\n"
                        f"work_dir: {tmp_path / 'work'}\n")
        return path

    def test_end_to_end(self, config, tmp_path, capsys):
        c = str(config)
        run_cli("gen-data", "--config", c)
        run_cli("train", "--config", c)
        run_cli("sweep", "--config", c, "--channels", "Rician,Mixed")
        run_cli("classify-eval", "--config", c)
        run_cli("image-demo", "--config", c, "--method", "LS,UniC", "--channel", "TdlA")
        run_cli("timing", "--config", c, "--trials", "30")
        work = tmp_path / "work"
        for name in ("ber_np8.csv", "classifier_np8_confusion.csv", "classifier_np8_accuracy.csv",
                     "timing_np8.csv", "images/transmitted.pgm", "images/TdlA_UniC_np8.pgm", "np8/config.yaml"):
            assert (work / name).exists(), name
        rows = read_ber_csv(work / "ber_np8.csv")
        assert {r["method"] for r in rows} == set(CONVENTIONAL + NEURAL)
        assert "wrote" in capsys.readouterr().out

    def test_sweep_reproducible(self, config, tmp_path):
        c = str(config)
        args = ["sweep", "--config", c, "--methods", "True,LS,MMSE_nonperfect", "--channels", "Winner2"]
        run_cli(*args, "--out", str(tmp_path / "a.csv"))
        run_cli(*args, "--out", str(tmp_path / "b.csv"))
        run_cli(*args, "--out", str(tmp_path / "c.csv"), "--seed", "1")
        a, b, c_ = ((tmp_path / n).read_bytes() for n in ("a.csv", "b.csv", "c.csv"))
        assert a == b
        assert a != c_

    def test_neural_sweep_without_training(self, config):
        with pytest.raises(StructureError, match="run `train` first"):
            run_cli("sweep", "--config", str(config), "--methods", "UniA")

    def test_bad_subcommand(self):
        with pytest.raises(SystemExit):
            cli.main(["fly"])
