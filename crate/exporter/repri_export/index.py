import os


def write_index(path, records):
    """records: iterable of (class_id, image_id, relative_path)."""
    lines = [f"{int(c)}\t{i}\t{p}\n" for c, i, p in records]
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(lines)


def read_index(path):
    root = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"line {n}: expected 3 tab-separated fields")
            out.append((int(fields[0]), fields[1], os.path.join(root, fields[2])))
    return out
