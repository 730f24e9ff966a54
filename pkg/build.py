"""Build script for creating the hab-station console executable."""
import PyInstaller.__main__
import os
from pathlib import Path


def build():
    """Build the command-line executable."""
    # Paths
    root = Path(__file__).parent
    src_dir = root / "src"
    main_script = src_dir / "app" / "main.py"
    runtime_hook = root / "pyi_rth_src_path.py"

    # PyInstaller arguments
    args = [
        str(main_script),
        "--name=hab-station",
        "--onefile",
        "--console",
        "--clean",
        "--noconfirm",
        f"--paths={src_dir}",
        f"--runtime-hook={runtime_hook}",
    ]

    # Add data files (sample soundings, configs)
    sep = os.pathsep
    if (root / "data" / "sample").exists():
        args.append(f"--add-data={root / 'data' / 'sample'}{sep}data/sample")
    if (root / "configs").exists():
        args.append(f"--add-data={root / 'configs'}{sep}configs")

    # Hidden imports
    args.extend([
        "--hidden-import=numpy",
        "--hidden-import=pandas",
        "--hidden-import=psutil",
    ])

    print("Building executable...")
    print(f"Arguments: {' '.join(args)}")

    # Run PyInstaller
    PyInstaller.__main__.run(args)


if __name__ == "__main__":
    build()
