import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                str(source),
                f"-DPython3_EXECUTABLE={sys.executable}",
                "-DLATTICECRF_PYTHON=ON",
                "-DLATTICECRF_TESTS=OFF",
                "-DCMAKE_BUILD_TYPE=Release",
            ],
            cwd=build_dir,
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_latticecrf", "--parallel"],
            cwd=build_dir,
            check=True,
        )

        built = next((build_dir / "python" / "latticecrf").glob("_latticecrf.*"))
        target = Path(self.get_ext_fullpath(ext.name))
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, target)


setup(
    packages=["latticecrf"],
    package_dir={"": "python"},
    ext_modules=[CMakeExtension("latticecrf._latticecrf")],
    cmdclass={"build_ext": CMakeBuild},
)
