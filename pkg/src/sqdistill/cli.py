"""Command-line client for the analysis service.

The CLI is a thin HTTP client: every subcommand posts a request to the
service API and renders the response as JSON on stdout or as CSV files.  By
default it talks to the bundled app over an in-process ASGI transport, so no
server needs to run; pass --server URL to target a remote instance
(``python -m sqdistill.service`` starts one).

Exit status: 0 on success, 1 on validation/domain errors (bad flags, bad
config fields, rejected physics), 2 on I/O errors (missing files,
unreachable server, unwritable output).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class CliError(Exception):
    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


class ArgumentParser(argparse.ArgumentParser):
    """argparse terminates with status 2 on bad flags; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_VALIDATION)


class ServiceClient:
    def __init__(self, server: str | None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        try:
            if self.server is not None:
                with httpx.Client(base_url=self.server, timeout=3600.0) as client:
                    response = client.post(path, json=payload)
            else:
                response = asyncio.run(self._post_in_process(path, payload))
        except httpx.HTTPError as exc:
            raise CliError(f"service unreachable: {exc}", EXIT_IO) from exc
        if response.status_code in (400, 422):
            raise CliError(_format_detail(response), EXIT_VALIDATION)
        if response.status_code != 200:
            raise CliError(f"service error {response.status_code}: {response.text}", EXIT_IO)
        return response.json()

    async def _post_in_process(self, path: str, payload: dict) -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://sqdistill.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)


def _format_detail(response: httpx.Response) -> str:
    try:
        detail = response.json().get("detail")
    except ValueError:
        return response.text
    if isinstance(detail, list):  # pydantic validation errors: name the fields
        parts = []
        for item in detail:
            loc = ".".join(str(p) for p in item.get("loc", []) if p != "body")
            parts.append(f"{loc}: {item.get('msg')}")
        return "invalid request: " + "; ".join(parts)
    return str(detail)


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}", EXIT_VALIDATION) from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows_to_csv(columns: list[str], rows: list[dict]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_csv_cell(row.get(c)) for c in columns) for row in rows)
    return "\n".join(lines) + "\n"


def cmd_analyze(client: ServiceClient, args) -> int:
    payload = {"config": _read_config(args.config)}
    if args.threshold is not None:
        payload["threshold"] = args.threshold
    _print_json(client.post("/analyze", payload))
    return EXIT_OK


def cmd_simulate(client: ServiceClient, args) -> int:
    payload = {"config": _read_config(args.config), "stderr_method": args.stderr_method}
    if args.threshold is not None:
        payload["threshold"] = args.threshold
    if args.samples is not None:
        payload["samples"] = args.samples
    _print_json(client.post("/simulate", payload))
    return EXIT_OK


_SWEEP_COLUMNS = [
    "threshold_snu", "distilled_mean_snu", "distilled_variance_snu",
    "distilled_variance_db", "success_probability", "standard_error_snu",
    "accepted_count", "error",
]


def cmd_sweep_threshold(client: ServiceClient, args) -> int:
    payload = {
        "config": _read_config(args.config),
        "min_threshold": args.min,
        "max_threshold": args.max,
        "steps": args.steps,
        "monte_carlo": args.mc,
    }
    response = client.post("/sweep/threshold", payload)
    _write_text(Path(args.out), _rows_to_csv(_SWEEP_COLUMNS, response["rows"]))
    return EXIT_OK


def cmd_sweep_angle(client: ServiceClient, args) -> int:
    payload = {
        "config": _read_config(args.config),
        "threshold": args.threshold,
        "beta_min_deg": args.min_deg,
        "beta_max_deg": args.max_deg,
        "steps": args.steps,
    }
    response = client.post("/sweep/angle", payload)
    columns = ["beta_deg", "distilled_mean_snu", "distilled_variance_snu",
               "distilled_variance_db", "success_probability"]
    _write_text(Path(args.out), _rows_to_csv(columns, response["rows"]))
    return EXIT_OK


def cmd_tomo(client: ServiceClient, args) -> int:
    from .tomography import WignerGrid, wigner_grid_to_csv

    mode = "analytic" if args.analytic else ("postselected" if args.postselected else "sampled")
    payload = {
        "config": _read_config(args.config),
        "mode": mode,
        "n_angles": args.angles,
        "samples_per_angle": args.per_angle,
        "bins": args.bins,
        "grid_points": args.grid_points,
        "filter_cutoff": args.cutoff,
    }
    if args.range is not None:
        payload["histogram_range"] = args.range
    if args.grid_extent is not None:
        payload["grid_extent"] = args.grid_extent
    response = client.post("/tomography", payload)
    grid = WignerGrid(response["x_axis"], response["p_axis"], response["values"])
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        wigner_grid_to_csv(grid, out)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc
    for warning in response["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def cmd_ingest(client: ServiceClient, args) -> int:
    try:
        record_text = Path(args.record_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {args.record_file}: {exc}", EXIT_IO) from exc
    payload = {
        "record_text": record_text,
        "threshold": args.threshold,
        "keep_side": args.keep_side,
        "modulation_filter": args.filter,
        "permissive": args.permissive,
    }
    response = client.post("/ingest", payload)
    text = json.dumps(response, indent=2, sort_keys=True) + "\n"
    if args.out is not None:
        _write_text(Path(args.out), text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_reproduce(client: ServiceClient, args) -> int:
    response = client.post("/reproduce", {"figure": args.fig})
    out_dir = Path(args.out)
    for name, content in sorted(response["files"].items()):
        _write_text(out_dir / name, content)
        print(f"wrote {out_dir / name}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="sqdistill",
        description="Squeezing distillation analysis: closed form, Monte Carlo, "
        "tomography, and record ingestion.",
    )
    parser.add_argument("--server", default=None,
                        help="service URL (default: run the bundled app in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form distillation result as JSON")
    p.add_argument("config")
    p.add_argument("--threshold", type=float, default=None,
                   help="override the config threshold")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo estimate with uncertainties as JSON")
    p.add_argument("config")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--stderr-method", choices=["bootstrap", "normal"], default="bootstrap")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep-threshold", help="distillation versus threshold as CSV")
    p.add_argument("config")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mc", action="store_true", help="post-select a Monte Carlo dataset")
    p.set_defaults(handler=cmd_sweep_threshold)

    p = sub.add_parser("sweep-angle", help="distillation versus tap angle as CSV")
    p.add_argument("config")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--min-deg", type=float, default=0.0)
    p.add_argument("--max-deg", type=float, default=90.0)
    p.add_argument("--steps", type=int, default=31)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_sweep_angle)

    p = sub.add_parser("tomo", help="Wigner reconstruction of the transmitted state as CSV")
    p.add_argument("config")
    p.add_argument("--angles", type=int, default=128)
    p.add_argument("--per-angle", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--range", type=float, default=None,
                   help="histogram half-range in SNU (default: fit the state)")
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--grid-extent", type=float, default=None)
    p.add_argument("--cutoff", type=float, default=0.7)
    p.add_argument("--analytic", action="store_true",
                   help="emit the exact Wigner grid instead of a reconstruction")
    p.add_argument("--postselected", action="store_true",
                   help="reconstruct the post-selected signal state")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_tomo)

    p = sub.add_parser("ingest", help="post-select a two-channel record file")
    p.add_argument("record_file")
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--keep-side", choices=["above", "below"], default="above")
    p.add_argument("--filter", choices=["all", "on_only", "off_only"], default="all")
    p.add_argument("--permissive", action="store_true",
                   help="drop bins straddling a toggle edge instead of failing")
    p.add_argument("--out", default=None, help="write the JSON result here")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("reproduce", help="emit the CSV data underlying a reference figure")
    p.add_argument("--fig", type=int, choices=[2, 3, 4, 5], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(ServiceClient(args.server), args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.status


if __name__ == "__main__":
    sys.exit(main())
