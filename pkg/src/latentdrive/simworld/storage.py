"""On-disk corpus: one directory per episode plus a JSON index.

Episode file layout (integers little-endian):

    magic   4 bytes  b"LDEP"
    version u32
    hlen    u32      header JSON length
    header  JSON: dt, maneuver, seed, frame/array shapes, rig, scene
    frames  n_frames fixed-size records, each:
              t u32, command u8, pad 3 bytes,
              ego_pose 3 f64, expert S*2 f64,
              images M*H*W*3 u8, depth M*h*w f64, semantics M*h*w u8

Round trips are lossless; magic/version/truncation problems raise
``CorpusFormatError``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..geometry import CameraModel
from .episode import Episode, FrameObservation, GenConfig, generate_episode
from .scene import Scene

EPISODE_MAGIC = b"LDEP"
EPISODE_VERSION = 1
INDEX_NAME = "index.json"
EPISODE_FILE = "episode.bin"


class CorpusError(ValueError):
    pass


class CorpusFormatError(CorpusError):
    """Corrupt or incompatible on-disk data (bad magic, version, truncation)."""


def _rig_to_dicts(rig) -> list:
    return [
        {
            "fx": cam.fx,
            "fy": cam.fy,
            "cx": cam.cx,
            "cy": cam.cy,
            "h": cam.h,
            "w": cam.w,
            "rotation": np.asarray(cam.rotation).reshape(-1).tolist(),
            "translation": np.asarray(cam.translation).tolist(),
        }
        for cam in rig
    ]


def _rig_from_dicts(dicts) -> list:
    return [
        CameraModel(
            fx=d["fx"],
            fy=d["fy"],
            cx=d["cx"],
            cy=d["cy"],
            h=d["h"],
            w=d["w"],
            rotation=np.array(d["rotation"]).reshape(3, 3),
            translation=np.array(d["translation"]),
        )
        for d in dicts
    ]


def write_episode(path, episode: Episode) -> None:
    path = Path(path)
    frames = episode.frames
    m, hh, ww, _ = frames[0].images.shape
    _, fh, fw = frames[0].depth.shape
    s = frames[0].expert_traj.shape[0]
    header = {
        "dt": episode.dt,
        "maneuver": int(episode.maneuver),
        "seed": list(episode.seed),
        "n_frames": len(frames),
        "views": m,
        "image_h": hh,
        "image_w": ww,
        "feature_h": fh,
        "feature_w": fw,
        "s": s,
        "rig": _rig_to_dicts(episode.rig),
        "scene": episode.scene.to_dict(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(EPISODE_MAGIC)
        f.write(struct.pack("<I", EPISODE_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for fr in frames:
            f.write(struct.pack("<IB3x", fr.t, int(fr.command)))
            f.write(np.ascontiguousarray(fr.ego_pose, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(fr.expert_traj, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(fr.images, dtype=np.uint8).tobytes())
            f.write(np.ascontiguousarray(fr.depth, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(fr.semantics, dtype=np.uint8).tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CorpusFormatError(f"truncated episode file while reading {what}")
    return buf


def read_episode(path) -> Episode:
    path = Path(path)
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != EPISODE_MAGIC:
            raise CorpusFormatError(f"bad magic in {path}: not an episode file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != EPISODE_VERSION:
            raise CorpusFormatError(f"unsupported episode version {version}")
        (hlen,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
        header = json.loads(_read_exact(f, hlen, "header").decode("utf-8"))
        m = header["views"]
        hh, ww = header["image_h"], header["image_w"]
        fh, fw = header["feature_h"], header["feature_w"]
        s = header["s"]
        frames = []
        for _ in range(header["n_frames"]):
            t, command = struct.unpack("<IB3x", _read_exact(f, 8, "frame header"))
            pose = np.frombuffer(_read_exact(f, 3 * 8, "ego pose"), dtype="<f8").copy()
            expert = (
                np.frombuffer(_read_exact(f, s * 2 * 8, "expert"), dtype="<f8")
                .reshape(s, 2)
                .copy()
            )
            images = (
                np.frombuffer(_read_exact(f, m * hh * ww * 3, "images"), dtype=np.uint8)
                .reshape(m, hh, ww, 3)
                .copy()
            )
            depth = (
                np.frombuffer(_read_exact(f, m * fh * fw * 8, "depth"), dtype="<f8")
                .reshape(m, fh, fw)
                .copy()
            )
            semantics = (
                np.frombuffer(_read_exact(f, m * fh * fw, "semantics"), dtype=np.uint8)
                .reshape(m, fh, fw)
                .copy()
            )
            frames.append(
                FrameObservation(
                    t=t,
                    images=images,
                    depth=depth,
                    semantics=semantics,
                    command=command,
                    expert_traj=expert,
                    ego_pose=pose,
                )
            )
        if f.read(1):
            raise CorpusFormatError("trailing bytes after final frame")
    return Episode(
        scene=Scene.from_dict(header["scene"]),
        rig=_rig_from_dicts(header["rig"]),
        frames=frames,
        maneuver=header["maneuver"],
        seed=header["seed"],
        dt=header["dt"],
    )


def maneuver_schedule(mix, count: int) -> list:
    """Deterministic interleaved maneuver assignment matching the mix."""
    mix = np.asarray(mix, dtype=np.float64)
    mix = mix / mix.sum()
    quota = np.floor(mix * count).astype(int)
    while quota.sum() < count:
        quota[int(np.argmax(mix * count - quota))] += 1
    order = []
    idx = 0
    while len(order) < count:
        maneuver = idx % len(quota)
        if quota[maneuver] > 0:
            order.append(maneuver)
            quota[maneuver] -= 1
        idx += 1
    return order


def generate_corpus(cfg: GenConfig, seed: int, episodes: int, out_dir) -> Path:
    """Generate and write a corpus; returns the corpus directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = maneuver_schedule(cfg.maneuver_mix, episodes)
    entries = []
    for i in range(episodes):
        ep_seed = [int(seed), i]
        episode = generate_episode(cfg, ep_seed, maneuver=schedule[i])
        name = f"ep_{i:04d}"
        ep_dir = out_dir / name
        ep_dir.mkdir(exist_ok=True)
        write_episode(ep_dir / EPISODE_FILE, episode)
        entries.append(
            {
                "dir": name,
                "seed": ep_seed,
                "maneuver": int(episode.maneuver),
                "n_frames": episode.n_frames,
            }
        )
    index = {
        "format_version": EPISODE_VERSION,
        "episodes": entries,
        "gen_config": cfg.to_dict(),
        "seed": int(seed),
    }
    with open(out_dir / INDEX_NAME, "w") as f:
        json.dump(index, f, indent=2, sort_keys=True)
    return out_dir


def read_index(corpus_dir) -> dict:
    corpus_dir = Path(corpus_dir)
    index_path = corpus_dir / INDEX_NAME
    if not index_path.exists():
        raise CorpusError(f"no corpus index at {index_path}")
    with open(index_path) as f:
        index = json.load(f)
    if index.get("format_version") != EPISODE_VERSION:
        raise CorpusFormatError(
            f"corpus index version {index.get('format_version')} unsupported"
        )
    if not index.get("episodes"):
        raise CorpusError(f"corpus at {corpus_dir} lists no episodes")
    return index


def read_corpus(corpus_dir) -> list:
    """Load every episode listed in the index, in index order."""
    corpus_dir = Path(corpus_dir)
    index = read_index(corpus_dir)
    return [
        read_episode(corpus_dir / entry["dir"] / EPISODE_FILE)
        for entry in index["episodes"]
    ]
