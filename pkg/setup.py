from setuptools import setup, find_packages
import pathlib

def _parse_requirements(fname="requirements.txt"):
    lines = (pathlib.Path(__file__).parent / fname).read_text().splitlines()
    return [l.strip() for l in lines if l.strip() and not l.startswith("#")]

setup(
    name="adgan",
    version="0.1.0",
    # the library lives under adgan/ (+ adgan/utils/)
    packages=find_packages(include=["adgan", "adgan.*"]),
    include_package_data=True,
    package_data={
        "": ["config.yml", "configs/*.yml"],
    },
    # tell it about the one-off CLI driver main.py
    py_modules=["main"],
    python_requires=">=3.9",
    install_requires=_parse_requirements(),
    entry_points={
        "console_scripts": [
            # point the script at the standalone module main.py
            "adgan = main:main",
        ],
    },
    description="Controllable face aging with an attribute-disentanglement GAN on a numpy autodiff core",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
