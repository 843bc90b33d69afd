#!/usr/bin/env python3
"""Write a Topology Zoo style GraphML file from the copy bundled with topohub.

The original topology-zoo.org files carry Latitude/Longitude/label node
attributes; topohub ships the same graphs as NetworkX node-link JSON with
(longitude, latitude) positions rounded to 0.01 degrees.

    pip install topohub
    python tools/topohub_to_graphml.py VtlWavenet2011 data/VtlWavenet2011.graphml
"""
import argparse
import sys
from xml.sax.saxutils import escape, quoteattr

import topohub


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("name", help="Topology Zoo network name, e.g. VtlWavenet2011")
    ap.add_argument("out", help="output .graphml path")
    args = ap.parse_args(argv)

    g = topohub.get(f"topozoo/{args.name}")
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance">',
        '  <key attr.name="Network" attr.type="string" for="graph" id="d0" />',
        '  <key attr.name="Source" attr.type="string" for="graph" id="d1" />',
        '  <key attr.name="Longitude" attr.type="double" for="node" id="d32" />',
        '  <key attr.name="Latitude" attr.type="double" for="node" id="d29" />',
        '  <key attr.name="label" attr.type="string" for="node" id="d33" />',
        '  <graph edgedefault="undirected">',
        f'    <data key="d0">{escape(args.name)}</data>',
        '    <data key="d1">topohub topozoo (positions rounded to 0.01 deg)</data>',
    ]
    for node in g["nodes"]:
        lines.append(f'    <node id={quoteattr(str(node["id"]))}>')
        if node.get("pos") is not None:
            lon, lat = node["pos"]
            lines.append(f'      <data key="d32">{lon}</data>')
            lines.append(f'      <data key="d29">{lat}</data>')
        lines.append(f'      <data key="d33">{escape(node["name"])}</data>')
        lines.append("    </node>")
    for edge in g["edges"]:
        lines.append(
            f'    <edge source={quoteattr(str(edge["source"]))} '
            f'target={quoteattr(str(edge["target"]))} />'
        )
    lines += ["  </graph>", "</graphml>", ""]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    return 0


if __name__ == "__main__":
    sys.exit(main())
