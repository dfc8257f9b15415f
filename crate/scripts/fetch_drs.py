#!/usr/bin/env python3
"""Write data/drs.csv (diabetic retinopathy study, 197 patients x 2 eyes).

The table is taken from the `rdatasets` wheel (survival::diabetic), either
downloaded with pip or read from a wheel given on the command line.
Output columns: family (patient id), rep (1 = left eye, 2 = right eye),
time, status, treated.
"""

import argparse
import glob
import io
import lzma
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

MEMBER = "rdatasets/_data/survival/diabetic.pkl.compress"


def load(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = z.read(MEMBER)
    return pd.read_pickle(io.BytesIO(lzma.decompress(raw)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--wheel", help="path to an rdatasets wheel")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "drs.csv"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel
        if wheel is None:
            subprocess.run([sys.executable, "-m", "pip", "download", "rdatasets", "--no-deps", "-d", tmp], check=True)
            wheel = glob.glob(f"{tmp}/rdatasets-*.whl")[0]
        df = load(wheel)

    out = pd.DataFrame(
        {
            "family": df["id"].astype(int),
            "rep": (df["eye"] == "right").astype(int) + 1,
            "time": df["time"],
            "status": df["status"].astype(int),
            "treated": df["trt"].astype(int),
        }
    )
    if len(out) != 394:
        sys.exit(f"expected 394 rows, got {len(out)}")
    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(args.out, index=False)
    print(f"wrote {len(out)} rows to {args.out}")


if __name__ == "__main__":
    main()
