"""Setup configuration for propdb."""

from setuptools import setup, find_packages

setup(
    name="propdb",
    version="0.1.0",
    description="Probabilistic query evaluation by dissociation",
    author="Scott Williams",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["main"],
    install_requires=[
        "textual>=6.2.1",
        "rich>=13.0.0",
        "numpy>=2.0.0",
        "networkx>=3.2",
    ],
    entry_points={
        "console_scripts": [
            "propdb=propdb.cli:main",
            "propdb-explore=main:main",
        ],
    },
    python_requires=">=3.13",
)
