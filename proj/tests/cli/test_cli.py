import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

SCHEMA_FILES = {
    "mcox/fit-result/v1": "fit-result.v1.schema.json",
    "mcox/mcox-result/v1": "mcox-result.v1.schema.json",
    "mcox/simulate-summary/v1": "simulate-summary.v1.schema.json",
    "mcox/bench-summary/v1": "bench-summary.v1.schema.json",
}


class Runner:
    def __init__(self, binary, schemas, work):
        self.binary = binary
        self.work = work
        self.validators = {}
        for tag, name in SCHEMA_FILES.items():
            schema = json.loads((schemas / name).read_text())
            jsonschema.Draft202012Validator.check_schema(schema)
            self.validators[tag] = jsonschema.Draft202012Validator(schema)
        self.failures = []
        self.count = 0

    def run(self, name, args, expect_code, expect_schema=None, expect_stderr=None):
        self.count += 1
        out = self.work / name
        proc = subprocess.run([self.binary, *args, "--out", str(out)], capture_output=True, text=True)
        problems = []
        if proc.returncode != expect_code:
            problems.append(f"exit {proc.returncode}, expected {expect_code}: {proc.stderr.strip()}")
        if expect_stderr and expect_stderr not in proc.stderr:
            problems.append(f"stderr lacks {expect_stderr!r}: {proc.stderr.strip()}")
        doc = None
        if expect_schema:
            result = out / "result.json"
            if not result.exists():
                problems.append("result.json missing")
            else:
                doc = json.loads(result.read_text())
                if doc.get("schema") != expect_schema:
                    problems.append(f"schema tag {doc.get('schema')!r}")
                else:
                    errors = sorted(self.validators[expect_schema].iter_errors(doc), key=str)
                    problems.extend(f"schema: {e.message}" for e in errors[:5])
                if not (out / "report.csv").exists():
                    problems.append("report.csv missing")
        status = "ok" if not problems else "FAILED"
        print(f"{status} {name}")
        for p in problems:
            print(f"    {p}")
        if problems:
            self.failures.append(name)
        return doc


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--mcox", required=True)
    parser.add_argument("--schemas", required=True, type=pathlib.Path)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory(prefix="mcox-cli-") as tmp:
        work = pathlib.Path(tmp)
        r = Runner(args.mcox, args.schemas, work)
        data = work / "data.csv"
        tdata = work / "tdata.csv"
        r.run("make-data", ["simulate", "--n", "20000", "--reps", "0", "--seed", "5", "--data-out", str(data)], 0)
        r.run("make-tdata", ["simulate", "--n", "3000", "--covariate", "time-dependent", "--reps", "0",
                             "--seed", "6", "--data-out", str(tdata)], 0)
        features = ["--features", "x1,x2,x3,x4,x5"]
        tfeatures = ["--features", "x1,x2,x3,x4,x5,eps1,eps2,eps3,eps4,eps5", "--path", "poly:sum:1,t"]

        fit = r.run("fit", ["fit", "--data", str(data), *features], 0, "mcox/fit-result/v1")
        r.run("fit-time-dependent", ["fit", "--data", str(tdata), *tfeatures], 0, "mcox/fit-result/v1")
        r.run("fit-max-iter", ["fit", "--data", str(data), *features, "--max-iter", "1"], 2,
              "mcox/fit-result/v1", "NotConverged")
        mc = r.run("mcox-opt", ["mcox", "--data", str(data), *features, "--r", "1000", "--seed", "3",
                                "--with-oses"], 0, "mcox/mcox-result/v1")
        r.run("mcox-aft", ["mcox", "--data", str(data), *features, "--r", "1000", "--moment", "aft"], 0,
              "mcox/mcox-result/v1")
        matrix = work / "linear.csv"
        matrix.write_text("0,1,0,0,0,0,0\n1,0,0,0,0,0,0\n")
        r.run("mcox-linear", ["mcox", "--data", str(data), *features, "--r", "1000",
                              "--moment", f"linear:{matrix}"], 0, "mcox/mcox-result/v1")
        r.run("mcox-time-dependent", ["mcox", "--data", str(tdata), *tfeatures, "--r", "500"], 0,
              "mcox/mcox-result/v1")
        r.run("mcox-full-rate", ["mcox", "--data", str(data), *features, "--r", "20000"], 0,
              "mcox/mcox-result/v1", "warning")
        r.run("simulate", ["simulate", "--n", "5000", "--r", "200,400", "--reps", "4", "--estimators",
                           "UNI,MCox-OPT,MCox-APP,OSES,FULL"], 0, "mcox/simulate-summary/v1")
        r.run("simulate-time-dependent", ["simulate", "--n", "1000", "--covariate", "time-dependent", "--r",
                                          "100", "--reps", "3"], 0, "mcox/simulate-summary/v1")
        r.run("bench-n", ["bench", "--grid", "n:5000,10000", "--r", "300", "--repeats", "1"], 0,
              "mcox/bench-summary/v1")
        r.run("bench-r", ["bench", "--grid", "r:200,400", "--n", "5000", "--repeats", "1",
                          "--estimators", "UNI,MCox-OPT"], 0, "mcox/bench-summary/v1")

        empty = work / "empty.csv"
        empty.write_text("time,status,x1,x2,x3,x4,x5\n")
        r.run("empty-data", ["fit", "--data", str(empty), *features], 1, expect_stderr="EmptyDataset")
        r.run("missing-column", ["fit", "--data", str(data), "--features", "x1,nope"], 1)
        r.run("missing-file", ["fit", "--data", str(work / "absent.csv"), *features], 1)
        r.run("bad-moment", ["mcox", "--data", str(data), *features, "--r", "100", "--moment", "bogus"], 1)
        r.run("bad-path", ["fit", "--data", str(data), *features, "--path", "poly:"], 1)
        r.run("no-subcommand", [], 1)

        if fit is not None and mc is not None:
            r.count += 1
            if fit["n"] != mc["n"]:
                r.failures.append("fit/mcox n mismatch")
                print("FAILED consistency: n differs between fit and mcox")

        print(f"{r.count - len(r.failures)}/{r.count} CLI checks passed")
        return 1 if r.failures else 0


if __name__ == "__main__":
    sys.exit(main())
