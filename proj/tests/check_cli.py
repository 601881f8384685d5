"""Runs the CLI on every sample config, validates the reports against the
schema and checks the exit-code contract."""
import json
import os
import subprocess
import sys
import tempfile

import jsonschema


def run(cli, args):
    return subprocess.run([cli] + args, capture_output=True, text=True)


def main():
    cli, configs, schema_path = sys.argv[1:4]
    with open(schema_path) as f:
        schema = json.load(f)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    for name in sorted(os.listdir(configs)):
        if not name.endswith(".json"):
            continue
        path = os.path.join(configs, name)
        with open(path) as f:
            command = json.load(f)["command"]
        p = run(cli, [command, "--config", path])
        if p.returncode != 0:
            print(f"{name}: exit {p.returncode}: {p.stderr.strip()}")
            failures += 1
            continue
        report = json.loads(p.stdout)
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        for e in errors:
            print(f"{name}: {list(e.path)}: {e.message}")
        failures += len(errors)
        # Same config twice gives the same bytes.
        if run(cli, [command, "--config", path]).stdout != p.stdout:
            print(f"{name}: output differs between runs")
            failures += 1
        print(f"{name}: ok")

    with tempfile.TemporaryDirectory() as tmp:
        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w") as f:
            json.dump({"command": "bs", "spectral": {"h": 0, "map": {"type": "affine"}}}, f)
        expect = [
            (["bs", "--config", bad], 2),
            (["bs", "--config", os.path.join(configs, "bs_affine.json"), "--h", "1.5"], 2),
            (["straighten", "--config", os.path.join(tmp, "missing.json")], 4),
            (["straighten", "--config", os.path.join(configs, "straighten_zero.json"),
              "--out", os.path.join(tmp, "no", "such", "dir.json")], 4),
            (["hj", "--config", os.path.join(configs, "hj.json"), "--tol", "1e-3"], 2),
        ]
        nonconv = os.path.join(tmp, "nonconv.json")
        with open(os.path.join(configs, "hj.json")) as f:
            cfg = json.load(f)
        cfg["numerics"]["max_iters"] = 2
        with open(nonconv, "w") as f:
            json.dump(cfg, f)
        expect.append((["hj", "--config", nonconv], 3))
        for args, code in expect:
            p = run(cli, args)
            if p.returncode != code:
                print(f"{args}: exit {p.returncode}, expected {code}: {p.stderr.strip()}")
                failures += 1

        csv_path = os.path.join(tmp, "l.csv")
        p = run(cli, ["bs", "--config", os.path.join(configs, "bs_affine.json"), "--format", "csv", "--out", csv_path])
        with open(csv_path) as f:
            header = f.readline().strip()
        if p.returncode != 0 or header != "k1,k2,re_z,im_z,mult,residual":
            print(f"csv output: exit {p.returncode}, header {header!r}")
            failures += 1
    print("failures:", failures)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
