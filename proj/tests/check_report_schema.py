"""Validates eval reports produced by the CLI against docs/eval_report.schema.json."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main():
    lnn, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    with tempfile.TemporaryDirectory() as tmp:
        for system in ["ball", "double_pendulum", "relativistic", "wave1d"]:
            out = Path(tmp) / f"{system}.json"
            subprocess.run([lnn, "eval", "--analytic", "--system", system, "--grid-points", "8",
                            "--n-traj", "2", "--steps", "5", "--dt", "0.001", "--out", str(out)],
                           check=True, stdout=subprocess.DEVNULL)
            report = json.loads(out.read_text())
            validator.validate(report)
            broken = dict(report, extra_field=1)
            if validator.is_valid(broken):
                sys.exit(f"{system}: schema accepted an unknown top-level key")
            print(f"{system}: ok")


if __name__ == "__main__":
    main()
