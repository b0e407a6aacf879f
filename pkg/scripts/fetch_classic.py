"""Download the redistributable classic test images into ``$MSTLD_DATA/classic``.

Same as ``mstld fetch``; images without a pinned public source are listed so
they can be placed by hand.
"""
import sys

from mstld.datasets import fetch_classic

if __name__ == "__main__":
    found = fetch_classic(sys.argv[1] if len(sys.argv) > 1 else None)
    for name, path in found.items():
        print(f"{name:12s} {path if path else 'missing'}")
