from setuptools import setup

DISTNAME = "Kuramoto-series"
DESCRIPTION = "Frequency synchronization of heterogeneous Kuramoto networks by power series inversion."
MAINTAINER = "Ryan Lane"
MAINTAINER_EMAIL = "r.i.lane@tudelft.nl"
LICENSE = "LICENSE"
URL = "https://github.com/hoogenboom-group/kuramoto-series"
VERSION = "0.1"
PACKAGES = [
    "kurasync",
]
INSTALL_REQUIRES = [
    "click>=8.0",
    "networkx>=2.6",
    "numpy",
    "pandas>=1.5",
    "scipy",
    "sympy",
    "tqdm",
]
EXTRAS_REQUIRE = {
    "test": [
        "hypothesis",
        "pytest",
    ],
}
ENTRY_POINTS = {
    "console_scripts": [
        "kurasync = kurasync.cli:main",
    ],
}

if __name__ == '__main__':

    setup(
        name=DISTNAME,
        version=VERSION,
        author=MAINTAINER,
        author_email=MAINTAINER_EMAIL,
        packages=PACKAGES,
        include_package_data=True,
        url=URL,
        license=LICENSE,
        description=DESCRIPTION,
        long_description=open("README.md").read(),
        long_description_content_type="text/markdown",
        install_requires=INSTALL_REQUIRES,
        extras_require=EXTRAS_REQUIRE,
        entry_points=ENTRY_POINTS,
        python_requires=">=3.8",
    )
