import numpy as np
import pytest

from cyclospeech import (
    AudioBuffer,
    MetricRecord,
    MixSpec,
    aggregate,
    curve_points,
    mix_at_snr,
    si_sdr,
    stoi,
)
from cyclospeech.metrics import write_records_csv, write_table_csv

FS = 16000


def test_si_sdr_identity_hits_cap():
    rng = np.random.default_rng(0)
    x = AudioBuffer(rng.standard_normal(8000), FS)
    assert si_sdr(x, x) == 100.0


def test_si_sdr_scale_invariant():
    rng = np.random.default_rng(1)
    ref = AudioBuffer(rng.standard_normal(8000), FS)
    est = AudioBuffer(ref.samples + 0.1 * rng.standard_normal(8000), FS)
    base = si_sdr(est, ref)
    for c in (2.0, 0.01, 317.0):
        scaled = AudioBuffer(c * est.samples, FS)
        assert abs(si_sdr(scaled, ref) - base) <= 1e-9
    doubled_ref = AudioBuffer(2.0 * ref.samples, FS)
    assert si_sdr(doubled_ref, ref) == 100.0


def test_si_sdr_orthogonal_noise_exact_ten_db():
    # Gram-Schmidt an exactly orthogonal perturbation with 1/10 the energy
    rng = np.random.default_rng(2)
    r = rng.standard_normal(4096)
    raw = rng.standard_normal(4096)
    n = raw - (np.dot(raw, r) / np.dot(r, r)) * r
    n *= np.sqrt(np.dot(r, r) / 10.0) / np.linalg.norm(n)
    value = si_sdr(AudioBuffer(r + n, FS), AudioBuffer(r, FS))
    assert abs(value - 10.0) <= 1e-6


def test_si_sdr_matches_lstsq_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        r = rng.standard_normal(512)
        e = rng.standard_normal(512)
        a = np.linalg.lstsq(r[:, None], e, rcond=None)[0][0]
        target = a * r
        expected = 10 * np.log10(np.dot(target, target) / np.sum((e - target) ** 2))
        got = si_sdr(AudioBuffer(e, FS), AudioBuffer(r, FS))
        assert abs(got - expected) <= 1e-9


def test_si_sdr_rejects_degenerate():
    x = AudioBuffer(np.ones(100), FS)
    with pytest.raises(ValueError, match="zero energy"):
        si_sdr(x, AudioBuffer(np.zeros(100), FS))
    with pytest.raises(ValueError, match="length"):
        si_sdr(x, AudioBuffer(np.ones(99), FS))


def test_stoi_self_scores_near_one(speech_4s):
    assert stoi(speech_4s, speech_4s) >= 0.999


def test_stoi_white_noise_low(speech_4s):
    rng = np.random.default_rng(4)
    scores = []
    for seed in range(10):
        noise = AudioBuffer(
            np.random.default_rng(seed).standard_normal(len(speech_4s)) * 0.1, FS
        )
        scores.append(stoi(noise, speech_4s))
    assert np.mean(scores) <= 0.25


def test_stoi_monotonic_in_snr(speech_4s):
    rng = np.random.default_rng(5)
    noise = AudioBuffer(rng.standard_normal(len(speech_4s)), FS)
    values = []
    for snr in (-10.0, 0.0, 10.0):
        mixture, _ = mix_at_snr(speech_4s, noise, MixSpec(snr_db=snr))
        values.append(stoi(mixture, speech_4s))
    assert values[0] < values[1] < values[2]


def test_stoi_gain_invariant(speech_4s):
    rng = np.random.default_rng(6)
    noise = AudioBuffer(rng.standard_normal(len(speech_4s)), FS)
    mixture, _ = mix_at_snr(speech_4s, noise, MixSpec(snr_db=0.0))
    base = stoi(mixture, speech_4s)
    scaled = AudioBuffer(7.3 * mixture.samples, FS)
    assert abs(stoi(scaled, speech_4s) - base) <= 1e-6


def test_stoi_too_short_rejected():
    x = AudioBuffer(np.random.default_rng(7).standard_normal(3000), FS)
    with pytest.raises(ValueError, match="ms"):
        stoi(x, x)


def make_record(file, snr, preproc="id", mask="none", sdr=5.0, st=0.8):
    return MetricRecord(file, snr, preproc, mask, sdr, st)


def test_metric_record_clamps_stoi():
    assert make_record("a", 0.0, st=-0.2).stoi == 0.0
    assert make_record("a", 0.0, st=1.3).stoi == 1.0


def test_aggregate_default_buckets():
    records = [
        make_record("a", -15.0, sdr=1.0, st=0.3),
        make_record("b", -5.0, sdr=5.0, st=0.6),
        make_record("c", 0.0, sdr=9.0, st=0.9),  # upper edge stays in [-10,0]
    ]
    rows = aggregate(records)
    assert [r["snr_bucket"] for r in rows] == ["[-20,-10)", "[-10,0]"]
    assert rows[0]["si_sdr_db"] == 1.0
    assert rows[1]["count"] == 2
    assert rows[1]["si_sdr_db"] == 7.0


def test_aggregate_duplicates_mean_idempotent():
    records = [make_record("a", -15.0, sdr=2.0)] * 3
    rows = aggregate(records)
    assert rows[0]["si_sdr_db"] == 2.0
    assert rows[0]["count"] == 3


def test_aggregate_out_of_bucket_goes_to_other():
    records = [make_record("a", -15.0), make_record("b", 12.0)]
    rows = aggregate(records)
    labels = [r["snr_bucket"] for r in rows]
    assert "other" in labels
    assert sum(r["count"] for r in rows) == 2


def test_aggregate_reserves_external_metric_columns():
    rows = aggregate([make_record("a", -15.0)])
    assert rows[0]["dnsmos"] == ""
    assert rows[0]["pesq"] == ""


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError, match="no records"):
        aggregate([])


def test_curve_points_binning():
    records = [
        make_record("a", -17.0, sdr=1.0),
        make_record("b", -16.0, sdr=3.0),
        make_record("c", -3.0, sdr=8.0),
    ]
    rows = curve_points(records, bin_width=5.0)
    assert len(rows) == 2
    assert rows[0]["snr_bin_db"] == -17.5
    assert rows[0]["si_sdr_db"] == 2.0
    assert rows[1]["snr_bin_db"] == -2.5


def test_csv_schemas(tmp_path):
    records = [make_record("a", -15.0, sdr=1.23456789, st=0.5)]
    path = tmp_path / "metrics.csv"
    write_records_csv(path, records)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    assert lines[0] == "file,input_snr_db,preproc,mask,si_sdr_db,stoi"
    assert lines[1] == "a,-15.000000,id,none,1.234568,0.500000"
    assert "\r" not in text

    table = tmp_path / "aggregate.csv"
    write_table_csv(table, aggregate(records))
    header = table.read_text(encoding="utf-8").split("\n")[0]
    assert header == "snr_bucket,preproc,mask,count,si_sdr_db,stoi,dnsmos,pesq"
