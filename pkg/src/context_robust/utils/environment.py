"""
Environment introspection for provenance records and the --info flag
"""
import platform
import sys
from importlib import metadata
from typing import Dict, Optional

from .. import config
from .rng import SAMPLERS

PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "python-dotenv")


def package_version(name: str) -> Optional[str]:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return None


def environment_info() -> Dict:
    """Python, platform, numerical package versions and the random stream setup"""
    return {
        "python": platform.python_version(),
        "platform": f"{platform.system()} {platform.release()}",
        "architecture": platform.machine(),
        "packages": {name: package_version(name) for name in PACKAGES},
        "prng": config.PRNG_NAME,
        "samplers": dict(SAMPLERS),
    }


def print_environment(stream=None):
    """Print environment information"""
    stream = stream or sys.stdout
    info = environment_info()
    print("=" * 60, file=stream)
    print("📊 System Information", file=stream)
    print("=" * 60, file=stream)
    print(f"  Platform: {info['platform']}", file=stream)
    print(f"  Architecture: {info['architecture']}", file=stream)
    print(f"  Python: {info['python']}", file=stream)

    print("\n📦 Packages:", file=stream)
    for name, version in info["packages"].items():
        status = f"✅ {version}" if version else "❌ not installed"
        print(f"  {name}: {status}", file=stream)

    print("\n🎲 Random streams:", file=stream)
    print(f"  Generator: {info['prng']}", file=stream)
    for kind, algorithm in info["samplers"].items():
        print(f"  {kind}: {algorithm}", file=stream)
    return info
