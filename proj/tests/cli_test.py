#!/usr/bin/env python3
"""End-to-end exercise of the aegis CLI: every subcommand, the exit-code
contract, and the output formats. Driven by ctest with AEGIS_CLI set."""

import json
import os
import subprocess
import sys
import tempfile

AEGIS = os.environ["AEGIS_CLI"]
failures = []


def check(cond, label):
    print(("ok   " if cond else "FAIL ") + label)
    if not cond:
        failures.append(label)


def run(*args, expect=0):
    proc = subprocess.run([AEGIS, *args], capture_output=True, text=True)
    check(proc.returncode == expect,
          f"exit {proc.returncode} == {expect}: aegis {' '.join(args[:3])}...")
    return proc


def main():
    tmp = tempfile.mkdtemp(prefix="aegis_cli_")
    os.chdir(tmp)

    with open("corpus.cfg", "w") as f:
        f.write(
            "n=30\nseed=5\nprofile.count=2\n"
            "profile.0.kind=benign_stochastic\nprofile.0.label=0\n"
            "profile.0.flows=12\nprofile.0.packets_per_flow=300\nprofile.0.seed=6\n"
            "profile.1.kind=c2_beacon\nprofile.1.label=1\n"
            "profile.1.flows=12\nprofile.1.packets_per_flow=300\nprofile.1.seed=7\n"
        )
    out = run("synth", "--config", "corpus.cfg", "--out", "corpus", "--pcap", "traffic")
    check(os.path.exists("corpus.train.aegt"), "train windows written")
    check(os.path.exists("corpus.test.aegt"), "test windows written")
    check(os.path.exists("traffic.c2_beacon.pcap"), "per-profile pcap written")
    check("train_windows=" in out.stdout, "synth reports window counts")

    with open("train.cfg", "w") as f:
        f.write("d=8\nd_h=8\nd_s=4\nepochs=8\n")
    out = run("train", "--windows", "corpus.train.aegt", "--config", "train.cfg",
              "--seed", "11", "--out", "model.ckpt")
    lines = out.stdout.strip().splitlines()
    check(lines[0].startswith("epoch\ttrain_loss\tval_loss"), "per-epoch log header")
    check(sum(1 for l in lines if l[:1].isdigit()) == 8, "one log row per epoch")
    check(os.path.exists("model.ckpt"), "checkpoint written")

    out = run("eval", "--windows", "corpus.test.aegt", "--checkpoint", "model.ckpt",
              "--out", "report.json")
    report = json.load(open("report.json"))
    c = report["counts"]
    f1 = 2 * c["tp"] / (2 * c["tp"] + c["fp"] + c["fn"])
    check(abs(f1 - report["metrics"]["f1"]) < 1e-12, "report f1 recomputes from its counts")
    check(report["version"] == 1 and len(report["sweep"]) > 1, "versioned report with sweep")

    out = run("stress", "--windows", "corpus.test.aegt", "--checkpoint", "model.ckpt",
              "--seed", "3")
    rows = [l for l in out.stdout.strip().splitlines() if l[:1].isdigit()]
    check(len(rows) == 4, "stress table has four rows")
    check(out.stdout.splitlines()[0] == "level\tf1\ttpr\tfpr", "stress table header")

    run("calibrate-tvd", "--windows", "corpus.train.aegt", "--checkpoint", "model.ckpt",
        "--out", "calibrated.ckpt", "--fp-target", "0.05")
    check(os.path.exists("calibrated.ckpt"), "calibrated checkpoint written")

    out = run("extract", "--pcap", "traffic.c2_beacon.pcap", "--n", "30", "--out", "beacon.aegt")
    check("windows=120" in out.stdout, "extract yields 12*300/30 windows")

    out = run("detect", "--ring", "det.ring", "--checkpoint", "model.ckpt",
              "--pcap", "traffic.c2_beacon.pcap", "--out", "verdicts.csv")
    verdicts = open("verdicts.csv").read().strip().splitlines()
    check(len(verdicts) == 120, "one verdict line per window")
    cols = verdicts[0].split(",")
    check(len(cols) == 7, "verdict line has the seven documented fields")
    check(cols[5] in ("malicious", "benign"), "verdict column is categorical")
    check("slots=3600" in out.stderr, "detect accounts for every slot")

    out = run("bench-ring", "--ring", "bench.ring", "--records", "100000",
              "--schedules", "4")
    check("latency_us" in out.stdout, "bench reports latency percentiles")

    # exit-code contract
    run("--bogus-flag", expect=2)
    run(expect=2)
    run("eval", "--windows", "missing.aegt", "--checkpoint", "model.ckpt", expect=1)
    run("extract", "--pcap", "corpus.test.aegt", "--out", "x.aegt", expect=1)  # not a pcap
    run("detect", "--ring", "nonexistent.ring", "--checkpoint", "model.ckpt", expect=1)

    print(f"\n{len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
