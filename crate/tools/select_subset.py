#!/usr/bin/env python3
"""Pick a deterministic subset of a Swagger 2.0 corpus with an exact number of
unique endpoints.

Files are visited in order of the SHA-256 of their relative path; a file is
taken when it has between 3 (fewer only to fill the last slots) and 12 endpoints and does not overshoot the target.

Usage:
  select_subset.py <corpus-dir> <out-dir> [target=100] [salt]
"""

import hashlib
import json
import os
import shutil
import sys


def main():
    src, dst = sys.argv[1], sys.argv[2]
    target = int(sys.argv[3]) if len(sys.argv) > 3 else 100
    salt = sys.argv[4] if len(sys.argv) > 4 else ""
    files = []
    for root, _, names in os.walk(src):
        for n in names:
            if n.endswith(".json"):
                rel = os.path.relpath(os.path.join(root, n), src)
                files.append(rel)
    files.sort(key=lambda r: hashlib.sha256((salt + r).encode()).hexdigest())
    seen = set()
    picked = []
    for rel in files:
        with open(os.path.join(src, rel)) as fh:
            doc = json.load(fh)
        paths = [p for p in (doc.get("paths") or {}) if p.startswith("/")]
        new = set(paths) - seen
        if not min(3, target - len(seen)) <= len(paths) <= 12 or len(seen) + len(new) > target:
            continue
        seen |= new
        picked.append(rel)
        if len(seen) == target:
            break
    for rel in picked:
        out = os.path.join(dst, rel.replace(os.sep, "__"))
        os.makedirs(os.path.dirname(out), exist_ok=True)
        shutil.copyfile(os.path.join(src, rel), out)
    print(f"{len(picked)} files, {len(seen)} unique endpoints")


if __name__ == "__main__":
    main()
