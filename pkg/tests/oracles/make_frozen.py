"""Regenerate frozen.json from the independent reference implementations."""

import json
import pathlib

from independent import ed_series, floquet_gap, steady_fss

out = {}
ed = ed_series(8, 1.0, 1.0, 0.1, 0.2, [1, 10, 50, 200], [2, 3])
out["ed_N8_h0_1_h1_0.1"] = {str(n): {"mz": mz, "F_Q": {str(L): f for L, f in F.items()}}
                             for n, (mz, F) in ed.items()}
out["gap_on_line"] = {}
for tau in (0.2, 0.5):
    for h0 in (0.1, 0.3, 0.5, 0.7, 0.9):
        out["gap_on_line"][f"{tau}_{h0}"] = floquet_gap(1.0, h0, 0.0 + tau * abs(h0 - 1), tau, 2000)
out["fss_diag"] = {}
for h0, h1 in [(0.191, 0.161), (0.83, 0.034), (0.161, 0.191), (0.6, 0.2)]:
    F = steady_fss(1.0, h0, h1, 0.2, 2000, [1, 2, 4, 10, 20])
    out["fss_diag"][f"{h0}_{h1}"] = {str(L): v for L, v in F.items()}
path = pathlib.Path(__file__).with_name("frozen.json")
path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
