#!/usr/bin/env python3
"""Reference class/tag/content extraction with BeautifulSoup + html5lib.

Writes <name>.csv next to each page in --out, or with --check compares the
existing files byte for byte and exits 1 on any difference.
"""
import argparse
import csv
import io
import pathlib
import re
import sys

from bs4 import BeautifulSoup, Comment

WS = re.compile(r"[ \t\n\f\r]+")


def decode(html_bytes):
    # Undeclared bodies: UTF-8 when valid, else windows-1252.
    try:
        return html_bytes.decode("utf-8")
    except UnicodeDecodeError:
        return html_bytes.decode("cp1252")


def triples(html_bytes):
    soup = BeautifulSoup(decode(html_bytes), "html5lib")
    for node in soup.find_all(string=lambda s: isinstance(s, Comment)):
        node.extract()
    for tag in soup.find_all(["script", "style", "template"]):
        tag.decompose()
    grouped = {}
    for el in soup.find_all(class_=True):
        classes = el.get("class") or []
        if not classes:
            continue
        content = WS.sub(" ", el.get_text()).strip(" \t\n\f\r")
        if not content:
            continue
        key = " ".join(classes)
        grouped.setdefault(key, {}).setdefault(el.name, []).append(content)
    for cls, tags in grouped.items():
        for tag, contents in tags.items():
            for c in contents:
                yield cls, tag, c


def render(html_bytes):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Class", "Tag", "Content"])
    for row in triples(html_bytes):
        w.writerow(row)
    return buf.getvalue().encode("utf-8")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("pages", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, required=True)
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()

    failed = False
    pages = sorted(args.pages.glob("*.html"))
    if not pages:
        print("no pages found", file=sys.stderr)
        return 1
    args.out.mkdir(parents=True, exist_ok=True)
    for page in pages:
        expected = render(page.read_bytes())
        target = args.out / (page.stem + ".csv")
        if args.check:
            if not target.exists() or target.read_bytes() != expected:
                print(f"MISMATCH {target}", file=sys.stderr)
                failed = True
        else:
            target.write_bytes(expected)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
