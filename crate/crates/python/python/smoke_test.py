"""Exercise the spoofsense extension end to end on synthetic audio."""

import math
import os
import sys
import tempfile

import spoofsense as ss

REPO = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", ".."))


def tone(f0, secs=0.5, rate=16000, vibrato=0.0):
    out, phase = [], 0.0
    for i in range(int(rate * secs)):
        t = i / rate
        phase += 2 * math.pi * f0 * (1 + vibrato * math.sin(2 * math.pi * 4 * t)) / rate
        out.append(0.4 * sum(math.sin(k * phase) / k for k in range(1, 5)))
    return ss.AudioBuffer(out, rate)


def main():
    buf = tone(150.0)
    assert len(buf) == 8000 and buf.sample_rate == 16000

    with tempfile.TemporaryDirectory() as d:
        wav = os.path.join(d, "a.wav")
        ss.write_wav(wav, buf)
        back = ss.read_wav(wav)
        assert max(abs(a - b) for a, b in zip(buf.samples, back.samples)) <= 1 / 32768

        mf = ss.extract(back, "mfcc")
        assert mf.dims == 39 and mf.num_frames > 0
        path = os.path.join(d, "a.mfcc.ssft")
        ss.write_feature(path, mf)
        again = ss.read_feature(path)
        assert again.utt_id == "a" and again.dims == 39

        rows = "\n".join(
            f"{u}\t{s}\ttarget-real\t-\t-\ta.wav" for u, s in [("x1", "x"), ("x2", "x"), ("y1", "y")]
        )
        manifest = os.path.join(d, "m.tsv")
        with open(manifest, "w") as f:
            f.write("utt_id\tspeaker_id\trole\tmimicked_target_id\tattack_id\tpath\n" + rows + "\n")
        pairs = ss.build_pairs(manifest, "r")
        assert pairs == [("x1", "x2", "positive", "R")], pairs

    f0 = [v for v in ss.estimate_f0(buf) if v > 0]
    assert f0 and all(abs(v - 150.0) < 3.0 for v in f0)

    jitter, shimmer, cycles = ss.perturbation(buf)
    assert cycles > 10 and jitter < 0.02 and shimmer < 0.05

    steady = ss.utterance_pse(buf)
    assert 0.0 <= steady
    assert ss.power_spectral_entropy([1.0, 1.0, 1.0, 1.0]) == 0.0

    e, _ = ss.eer([3.0, 4.0], [1.0, 2.0])
    assert e == 0.0
    cost = os.path.join(REPO, "configs", "tdcf_example.toml")
    t, _ = ss.min_tdcf([3.0, 4.0], [1.0, 2.0], cost)
    assert t == 0.0
    assert abs(ss.cosine_score([1.0, 0.0], [2.0, 0.0]) - 1.0) < 1e-12

    cfg = ss.Config.from_toml("f0_floor = 60.0\n")
    assert ss.estimate_f0(buf, cfg)

    try:
        ss.extract(buf, "lpc")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown feature kind accepted")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
