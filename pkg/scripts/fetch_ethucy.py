"""Fetch the ETH/UCY pedestrian annotations into data/ethucy/.

The raw files (frame, agent, x, y in meters) ship inside the source
distribution of the ``trajectron`` package on PyPI. This script downloads
that archive, extracts the six per-scene test files, and checks them
against the sha256 sums below.

    python scripts/fetch_ethucy.py [--dest data/ethucy] [--archive path/to/trajectron-0.1.3.tar.gz]
"""
import argparse
import hashlib
import io
import json
import sys
import tarfile
import urllib.request
from pathlib import Path

PACKAGE, VERSION = "trajectron", "0.1.3"
PREFIX = f"{PACKAGE}-{VERSION}/experiments/pedestrians/raw"

FILES = {
    "eth/biwi_eth.txt": "cf8d3fd342a15f409ebc2a1fc76b91a0f06390bd21f1e11410f3859331ab082b",
    "hotel/biwi_hotel.txt": "9caa771bb9153d6b809dd0916b6f86761b641e6bbb15e766c1de3133fbbb7fcf",
    "zara1/crowds_zara01.txt": "1147a1962a09abfb86f28c6cddcac862e095a0cf129b3016385b69eacdd09d85",
    "zara2/crowds_zara02.txt": "8a649d0f8c9ae75c87c4d23a85f892786b0aa30266e996c7be03e69dafff22ff",
    "univ/students001.txt": "a6d87f278d94136fe39b8be91555487a29ac77259ae403b9dba2d5c18caf7b5b",
    "univ/students003.txt": "e25798b660634330aa89f8bb259425de720e84d0873902726c1d1f4ccff21d6c",
}


def sdist_url() -> str:
    with urllib.request.urlopen(f"https://pypi.org/pypi/{PACKAGE}/{VERSION}/json", timeout=60) as r:
        meta = json.load(r)
    for f in meta["urls"]:
        if f["packagetype"] == "sdist":
            return f["url"]
    raise SystemExit(f"no sdist listed for {PACKAGE} {VERSION}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dest", default=str(Path(__file__).resolve().parents[1] / "data" / "ethucy"))
    ap.add_argument("--archive", help="use a local copy of the sdist instead of downloading")
    args = ap.parse_args(argv)

    if args.archive:
        blob = Path(args.archive).read_bytes()
    else:
        url = sdist_url()
        print(f"downloading {url}")
        with urllib.request.urlopen(url, timeout=300) as r:
            blob = r.read()

    dest = Path(args.dest)
    bad = 0
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        for rel, digest in FILES.items():
            scene, name = rel.split("/")
            data = tar.extractfile(f"{PREFIX}/{scene}/test/{name}").read()
            ok = hashlib.sha256(data).hexdigest() == digest
            bad += not ok
            out = dest / rel
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(data)
            print(f"{'ok ' if ok else 'BAD'} {out}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
