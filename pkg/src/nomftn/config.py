"""INI-style run configuration.

Sections and keys (all optional except ``[plan]``)::

    [plan]      profile = 3 | qams = 16,8,4 ; alpha ; v_total ; mode = nom|chow ; chow_gap_db
    [frame]     n_fft ; cp_len ; n_ts ; n_payload ; sample_rate
    [channel]   preset | kind, f_3db, table ; noise_psd ; rop_dbm
    [detector]  survivors = 16,8,4 ; exhaustive ; order
    [run]       seed ; frames ; threads
    [sweep]     parameter ; values = 1.0, 0.9, 0.8

A relative ``table`` path is resolved against the config file's directory.
"""
import configparser
from importlib import resources
from pathlib import Path
from typing import Optional

from . import channel as chan
from .errors import ConfigurationError
from .modem import BandPlan, FrameConfig
from .planner import allocation_profile
from .receiver import DetectorConfig
from .sim import SWEEP_PARAMS, RunConfig

SECTIONS = ("plan", "frame", "channel", "detector", "run", "sweep")


def _ints(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigurationError(f"expected a list of integers, got {text!r}") from None


def _sweep_value(name, text):
    text = text.strip()
    if name == "l_bands":
        return int(text) if text.isdigit() else text.upper()
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"sweep value {text!r} for {name} is not a number") from None


def _get(section, key, conv, default):
    if key not in section:
        return default
    raw = section[key]
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(raw)
    except ValueError:
        raise ConfigurationError(f"[{section.name}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _channel(sec, base: Path) -> chan.ChannelProfile:
    noise = _get(sec, "noise_psd", float, 0.0)
    rop = _get(sec, "rop_dbm", float, 0.0)
    if "preset" in sec:
        return chan.preset(sec["preset"].strip(), noise_psd=noise, rop_dbm=rop)
    kind = sec.get("kind", "flat").strip()
    table = None
    if "table" in sec:
        path = Path(sec["table"].strip())
        if not path.is_absolute():
            path = base / path
        try:
            table = chan.load_table(path)
        except OSError as exc:
            raise ConfigurationError(f"cannot read channel table {path}: {exc.strerror}") from None
    return chan.ChannelProfile(kind, f_3db=_get(sec, "f_3db", float, 10e9), table=table,
                               noise_psd=noise, rop_dbm=rop, name=kind)


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Build a :class:`RunConfig` from INI text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections {sorted(unknown)}")
    if not cp.has_section("plan"):
        raise ConfigurationError("config needs a [plan] section")
    for name in SECTIONS:
        if not cp.has_section(name):
            cp.add_section(name)
    p = cp["plan"]
    if "qams" in p:
        qams = list(_ints(p["qams"]))
    else:
        qams = allocation_profile(p.get("profile", "1").strip())
    plan = BandPlan.uniform(_get(p, "v_total", int, 120), _get(p, "alpha", float, 1.0), qams)

    f = cp["frame"]
    frame = FrameConfig(_get(f, "n_fft", int, 256), _get(f, "cp_len", int, 8),
                        _get(f, "n_ts", int, 20), _get(f, "n_payload", int, 200),
                        _get(f, "sample_rate", float, 26e9))

    d = cp["detector"]
    det = DetectorConfig(_ints(d["survivors"]) if "survivors" in d else None,
                         _get(d, "exhaustive", bool, False), d.get("order", "ascending").strip())

    sweep = None
    s = cp["sweep"]
    if "parameter" in s:
        name = s["parameter"].strip()
        if name not in SWEEP_PARAMS:
            raise ConfigurationError(f"cannot sweep {name!r}; sweepable: {SWEEP_PARAMS}")
        values = tuple(_sweep_value(name, v) for v in s.get("values", "").split(",") if v.strip())
        sweep = (name, values)

    r = cp["run"]
    seed = _get(r, "seed", int, 1)
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {seed}")
    return RunConfig(plan=plan, frame=frame, channel=_channel(cp["channel"], Path(base_dir)),
                     detector=det, master_seed=seed, n_frames=_get(r, "frames", int, 1),
                     sweep=sweep, mode=p.get("mode", "nom").strip(),
                     chow_gap_db=_get(p, "chow_gap_db", float, 3.0),
                     threads=_get(r, "threads", int, 1))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def shipped_configs() -> list:
    """Names of the example configs bundled with the package."""
    root = resources.files("nomftn").joinpath("configs")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".ini"))


def shipped_config(name: str) -> RunConfig:
    if not name.endswith(".ini"):
        name += ".ini"
    ref = resources.files("nomftn").joinpath("configs", name)
    if not ref.is_file():
        raise ConfigurationError(f"no shipped config {name!r}; known: {shipped_configs()}")
    return parse_config(ref.read_text(encoding="utf-8"))
