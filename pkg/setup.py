"""Setup configuration for toruscascade."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="toruscascade",
    version="0.1.0",
    author="toruscascade Contributors",
    description="Frequency cascade driven by a decaying potential on the torus: construction, simulation and bound checks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=[
        "PyYAML>=6.0",
        "halo>=0.0.31",
        "numpy>=1.23",
        "scipy>=1.10",
        "sympy>=1.11",
        "pandas>=1.5",
    ],
    entry_points={
        "console_scripts": [
            "toruscascade=toruscascade.cli:run",
        ],
    },
)
