#!/usr/bin/env python3
"""Regenerates the bundled pipeline fixture.

Produces a logit dump (2000 samples, 10 classes) plus the reference metrics
that `calsharp evaluate --split 0.2 --seed 42` must reproduce on it. The
reference numbers come from the scalar re-implementation below, which shares
no code with the C++ library; it mirrors the documented conventions instead:

  * deterministic split: splitmix64-driven Fisher-Yates, multiply-shift
    bounding, round(n * fraction) calibration rows, subsets in input order
  * temperature scaling: golden-section on log T in [log 0.01, log 100],
    tolerance 1e-6, falling back to T=1 when the fit is not an improvement
  * histogram binning / isotonic regression per class with renormalized rows
    (all-zero rows become uniform); mean replacement keeps the stored class
  * Nadaraya-Watson smoothing with exact-duplicate merging in sorted order,
    reflected KDE, trapezoid integration on the 201-point unit grid
  * ACE: equal-mass bins over the stable confidence order, tie runs assigned
    to the run head's bin, mean over non-empty bins

With --cli pointing at a built calsharp binary the golden SVGs are refreshed
as well (diagram + reliability for the none and mrr methods).

Usage: tools/make_fixture.py [--outdir tests/fixtures] [--cli build/tools/calsharp]
"""

import argparse
import bisect
import json
import math
import pathlib
import shutil
import subprocess
import tempfile

import numpy as np

MASK64 = (1 << 64) - 1
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------- rng / split

def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)), state


def bounded(word, bound):
    return (word * bound) >> 64


def llround(x):
    return int(math.floor(x + 0.5)) if x >= 0.0 else -int(math.floor(-x + 0.5))


def split_indices(n, fraction, seed):
    m = llround(float(n) * fraction)
    order = list(range(n))
    state = seed
    for i in range(n, 1, -1):
        word, state = splitmix64(state)
        j = bounded(word, i)
        order[i - 1], order[j] = order[j], order[i - 1]
    return sorted(order[:m]), sorted(order[m:])


# ---------------------------------------------------------------- predictions

class Predictions:
    """Flat row-major probability rows with labels; logits kept when known."""

    def __init__(self, n, k, probs, labels, logits=None):
        self.n, self.k = n, k
        self.probs, self.labels, self.logits = probs, labels, logits

    def row(self, i):
        return self.probs[i * self.k:(i + 1) * self.k]


def stable_softmax(row):
    m = row[0]
    for v in row[1:]:
        if v > m:
            m = v
    out = [math.exp(v - m) for v in row]
    s = 0.0
    for v in out:
        s += v
    return [v / s for v in out]


def normalize_rows(n, k, probs):
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += probs[i * k + j]
        dev = abs(s - 1.0)
        if 1e-9 < dev <= 1e-4:
            for j in range(k):
                probs[i * k + j] /= s


def from_probs(k, probs, labels):
    n = len(labels)
    normalize_rows(n, k, probs)
    return Predictions(n, k, probs, labels)


def from_logits(k, logits, labels):
    n = len(labels)
    probs = []
    for i in range(n):
        probs.extend(stable_softmax(logits[i * k:(i + 1) * k]))
    return Predictions(n, k, probs, labels, logits)


def take_rows(ps, idx):
    probs, labels = [], []
    logits = [] if ps.logits is not None else None
    for i in idx:
        probs.extend(ps.row(i))
        labels.append(ps.labels[i])
        if logits is not None:
            logits.extend(ps.logits[i * ps.k:(i + 1) * ps.k])
    return Predictions(len(idx), ps.k, probs, labels, logits)


def argmax(row):
    best = 0
    for j in range(1, len(row)):
        if row[j] > row[best]:
            best = j
    return best


def confidence_view(ps, pred=None):
    if pred is None:
        pred = [argmax(ps.row(i)) for i in range(ps.n)]
    conf = [ps.row(i)[pred[i]] for i in range(ps.n)]
    hit = [1 if ps.labels[i] == pred[i] else 0 for i in range(ps.n)]
    return pred, conf, hit


# -------------------------------------------------------------------- kernels

def collapse(xs, ys):
    pairs = sorted(zip(xs, ys))
    cx, cy, cw = [], [], []
    for x, y in pairs:
        if cx and cx[-1] == x and cy[-1] == y:
            cw[-1] += 1.0
        else:
            cx.append(x)
            cy.append(y)
            cw.append(1.0)
    return cx, cy, cw


def accumulate(cx, cy, cw, bandwidth, q, sums):
    for i in range(len(cx)):
        u = (q - cx[i]) / bandwidth
        kv = cw[i] * (INV_SQRT_2PI * math.exp(-0.5 * u * u) / bandwidth)
        sums[0] += kv
        sums[1] += kv * cy[i]


def nw_regress(xs, ys, bandwidth, queries):
    cx, cy, cw = collapse(xs, ys)
    out = []
    for q in queries:
        sums = [0.0, 0.0]
        accumulate(cx, cy, cw, bandwidth, q, sums)
        out.append(sums[1] / sums[0] if sums[0] > 0.0 else None)
    return out


def kde(xs, bandwidth, queries):
    cx, cy, cw = collapse(xs, [0.0] * len(xs))
    inv_n = 1.0 / len(xs)
    out = []
    for q in queries:
        sums = [0.0, 0.0]
        accumulate(cx, cy, cw, bandwidth, q, sums)
        accumulate(cx, cy, cw, bandwidth, -q, sums)
        accumulate(cx, cy, cw, bandwidth, 2.0 - q, sums)
        out.append(sums[0] * inv_n)
    return out


def unit_grid(m):
    return [float(i) / float(m - 1) for i in range(m)]


# -------------------------------------------------------------------- metrics

def accuracy(hit):
    s = 0.0
    for h in hit:
        s += h
    return s / len(hit)


def binned_ece(conf, hit, bins):
    b = bins
    conf_sum, hit_sum, count = [0.0] * b, [0.0] * b, [0.0] * b
    for i in range(len(conf)):
        j = int(conf[i] * bins)
        if j >= b:
            j = b - 1
        conf_sum[j] += conf[i]
        hit_sum[j] += hit[i]
        count[j] += 1.0
    e = 0.0
    n = float(len(conf))
    for j in range(b):
        if count[j] == 0.0:
            continue
        e += (count[j] / n) * abs(hit_sum[j] / count[j] - conf_sum[j] / count[j])
    return e


def ace(conf, hit, bins):
    n = len(conf)
    order = sorted(range(n), key=lambda i: conf[i])
    b = bins
    conf_sum, hit_sum, count = [0.0] * b, [0.0] * b, [0.0] * b
    r = 0
    while r < n:
        r2 = r
        while r2 < n and conf[order[r2]] == conf[order[r]]:
            r2 += 1
        j = r * b // n
        for t in range(r, r2):
            conf_sum[j] += conf[order[t]]
            hit_sum[j] += hit[order[t]]
            count[j] += 1.0
        r = r2
    e, nonempty = 0.0, 0
    for j in range(b):
        if count[j] == 0.0:
            continue
        e += abs(hit_sum[j] / count[j] - conf_sum[j] / count[j])
        nonempty += 1
    return e / float(nonempty)


def smoothed_ece(conf, hit, bandwidth, grid_points=201):
    grid = unit_grid(grid_points)
    hits = [float(h) for h in hit]
    m = nw_regress(conf, hits, bandwidth, grid)
    dens = kde(conf, bandwidth, grid)
    f = []
    for i in range(grid_points):
        if dens[i] <= 0.0:
            f.append(0.0)
            continue
        assert m[i] is not None, "regression undefined where the density is positive"
        f.append(abs(m[i] - grid[i]) * dens[i])
    integral = 0.0
    for i in range(grid_points - 1):
        integral += 0.5 * (f[i] + f[i + 1]) * (grid[i + 1] - grid[i])
    return integral


def nll(ps):
    s = 0.0
    for i in range(ps.n):
        p = ps.row(i)[ps.labels[i]]
        if p <= 0.0:
            return math.inf
        s -= math.log(p)
    return s / ps.n


def brier(ps):
    s = 0.0
    for i in range(ps.n):
        row = ps.row(i)
        d2 = 0.0
        for j in range(ps.k):
            d = (1.0 if j == ps.labels[i] else 0.0) - row[j]
            d2 += d * d
        s += d2
    return s / ps.n


def plugin_cal_error(conf, hit, bandwidth):
    hits = [float(h) for h in hit]
    m = nw_regress(conf, hits, bandwidth, conf)
    s = 0.0
    for i in range(len(conf)):
        assert m[i] is not None, "zero kernel mass at a sample point"
        h = conf[i]
        s += m[i] * m[i] - h * h - (2.0 * h) * (hits[i] - h)
    return s / len(conf)


# -------------------------------------------------------------- recalibrators

def golden_section(f, lo, hi, tol):
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def nll_at_temperature(z, labels, k, temperature):
    s = 0.0
    for i in range(len(labels)):
        base = i * k
        m = z[base] / temperature
        for j in range(1, k):
            v = z[base + j] / temperature
            if v > m:
                m = v
        lse = 0.0
        for j in range(k):
            lse += math.exp(z[base + j] / temperature - m)
        zl = z[base + labels[i]] / temperature
        s += math.log(lse) - (zl - m)
    return s / len(labels)


def fit_temperature(calib, tol=1e-6):
    z = calib.logits if calib.logits is not None else [
        math.log(p) if p > 0.0 else -math.inf for p in calib.probs]
    log_t_min, log_t_max = -4.605170185988091, 4.605170185988091

    degenerate = True
    for i in range(calib.n):
        row = calib.row(i)
        if row[argmax(row)] < 1.0 - 1e-9:
            degenerate = False
            break
    if degenerate:
        return math.exp(log_t_min)

    def objective(log_t):
        return nll_at_temperature(z, calib.labels, calib.k, math.exp(log_t))

    log_t = golden_section(objective, log_t_min, log_t_max, tol)
    temperature = math.exp(log_t)
    if objective(log_t) > objective(0.0):
        temperature = 1.0
    return temperature


def bin_of(p, bins):
    b = int(p * float(bins))
    return bins - 1 if b >= bins else b


def fit_histogram(calib, bins):
    values = [0.0] * (calib.k * bins)
    count = [0.0] * (calib.k * bins)
    for i in range(calib.n):
        row = calib.row(i)
        for j in range(calib.k):
            cell = j * bins + bin_of(row[j], bins)
            count[cell] += 1.0
            if calib.labels[i] == j:
                values[cell] += 1.0
    for cell in range(len(values)):
        if count[cell] > 0.0:
            values[cell] /= count[cell]
    return values


def pava(ys, ws):
    blocks = []  # [weighted sum, weight, run length]
    for y, w in zip(ys, ws):
        blocks.append([y * w, w, 1])
        while len(blocks) > 1:
            prev, top = blocks[-2], blocks[-1]
            if prev[0] / prev[1] <= top[0] / top[1]:
                break
            blocks.pop()
            blocks[-1] = [prev[0] + top[0], prev[1] + top[1], prev[2] + top[2]]
    fit = []
    for s, w, length in blocks:
        fit.extend([s / w] * length)
    return fit


def fit_isotonic(calib):
    breakpoints, values = [], []
    ws = [1.0] * calib.n
    for j in range(calib.k):
        order = sorted(range(calib.n), key=lambda t: calib.row(t)[j])
        xs = [calib.row(t)[j] for t in order]
        ys = [1.0 if calib.labels[t] == j else 0.0 for t in order]
        fit = pava(ys, ws)
        bp, val = [], []
        for t in range(calib.n):
            if bp and bp[-1] == xs[t]:
                val[-1] = fit[t]
            else:
                bp.append(xs[t])
                val.append(fit[t])
        breakpoints.append(bp)
        values.append(val)
    return breakpoints, values


def renormalize(row):
    s = 0.0
    for v in row:
        s += v
    if s > 0.0:
        return [v / s for v in row]
    return [1.0 / len(row)] * len(row)


def apply_method(name, calib, eval_ps, bins):
    """Returns (transformed predictions, stored prediction per row)."""
    base_pred = [argmax(eval_ps.row(i)) for i in range(eval_ps.n)]
    k = eval_ps.k
    if name == "none":
        return eval_ps, base_pred

    probs = []
    if name == "ts":
        t = fit_temperature(calib)
        z = eval_ps.logits if eval_ps.logits is not None else [
            math.log(p) if p > 0.0 else -math.inf for p in eval_ps.probs]
        for i in range(eval_ps.n):
            scaled = [z[i * k + j] / t for j in range(k)]
            probs.extend(stable_softmax(scaled))
    elif name == "hb":
        values = fit_histogram(calib, bins)
        for i in range(eval_ps.n):
            row = eval_ps.row(i)
            out = [values[j * bins + bin_of(row[j], bins)] for j in range(k)]
            probs.extend(renormalize(out))
    elif name == "ir":
        breakpoints, values = fit_isotonic(calib)
        for i in range(eval_ps.n):
            row = eval_ps.row(i)
            out = []
            for j in range(k):
                ub = bisect.bisect_right(breakpoints[j], row[j])
                out.append(values[j][0 if ub == 0 else ub - 1])
            probs.extend(renormalize(out))
    elif name == "mrr":
        _, _, calib_hit = confidence_view(calib)
        h_bar = accuracy(calib_hit)
        other = (1.0 - h_bar) / float(k - 1)
        for i in range(eval_ps.n):
            row = [other] * k
            row[base_pred[i]] = h_bar
            probs.extend(row)
    else:
        raise ValueError(name)

    out = from_probs(k, probs, eval_ps.labels)
    if name == "mrr":
        return out, base_pred
    return out, [argmax(out.row(i)) for i in range(out.n)]


# ------------------------------------------------------------------- pipeline

def number_or_inf(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def metrics_entry(ps, pred, bins, bandwidth):
    _, conf, hit = confidence_view(ps, pred)
    return {
        "accuracy": accuracy(hit),
        "ece_binned": binned_ece(conf, hit, bins),
        "ace": ace(conf, hit, bins),
        "smoothed_ece": smoothed_ece(conf, hit, bandwidth),
        "nll": number_or_inf(nll(ps)),
        "brier": number_or_inf(brier(ps)),
        "plugin_cal_error": number_or_inf(plugin_cal_error(conf, hit, bandwidth)),
        "plugin_cal_std": 0.0,
        "plugin_reps": 1,
    }


def load_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    k = len(header) - 1
    logits, labels = [], []
    for line in lines[1:]:
        if not line:
            continue
        fields = line.split(",")
        logits.extend(float(f) for f in fields[:k])
        labels.append(int(fields[k]))
    return from_logits(k, logits, labels)


def generate_dump(path, seed=20240817, n=2000, k=10):
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 2.0, size=(n, k))
    u = rng.random(n)
    # labels follow a flatter softmax than the dump's own logits, so the dump
    # is overconfident and every recalibrator has something to fix
    labels = []
    for i in range(n):
        p = stable_softmax([0.8 * v for v in z[i].tolist()])
        cum, y = 0.0, k - 1
        for j in range(k):
            cum += p[j]
            if u[i] < cum:
                y = j
                break
        labels.append(y)
    with path.open("w") as f:
        f.write(",".join(f"logit_{j}" for j in range(k)) + ",label\n")
        for i in range(n):
            row = ",".join(f"{v:.17g}" for v in z[i].tolist())
            f.write(f"{row},{labels[i]}\n")


def reference_metrics(ps, fraction=0.2, seed=42, bins=15, bandwidth=0.05):
    calib_idx, eval_idx = split_indices(ps.n, fraction, seed)
    calib = take_rows(ps, calib_idx)
    eval_ps = take_rows(ps, eval_idx)
    methods = {}
    for name in ("none", "ts", "hb", "ir", "mrr"):
        transformed, pred = apply_method(name, calib, eval_ps, bins)
        methods[name] = metrics_entry(transformed, pred, bins, bandwidth)
    return {"methods": methods}


def refresh_goldens(cli, csv_path, golden_dir):
    golden_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [str(cli), "diagram", "--input", str(csv_path), "--split", "0.2", "--seed", "42",
             "--recal", "none", "--recal", "mrr", "--reliability", "--out", tmp],
            check=True, stdout=subprocess.DEVNULL)
        for name in ("none.svg", "mrr.svg", "none_reliability.svg", "mrr_reliability.svg"):
            shutil.copyfile(pathlib.Path(tmp) / name, golden_dir / name)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--outdir", default="tests/fixtures", type=pathlib.Path)
    parser.add_argument("--cli", type=pathlib.Path,
                        help="built calsharp binary; refreshes the golden SVGs")
    args = parser.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    csv_path = args.outdir / "fixture_predictions.csv"
    generate_dump(csv_path)
    print(f"wrote {csv_path}")

    reference = reference_metrics(load_csv(csv_path))
    ref_path = args.outdir / "fixture_reference.json"
    ref_path.write_text(json.dumps(reference, indent=2) + "\n")
    print(f"wrote {ref_path}")

    if args.cli:
        refresh_goldens(args.cli, csv_path, args.outdir / "golden")
        print(f"wrote {args.outdir / 'golden'}/*.svg")


if __name__ == "__main__":
    main()
