import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="gridtune",
    version="0.0.1dev",
    description="H2 performance, tuning and delay robustness of inverter-controlled power networks.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["test", "test.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    install_requires=[
        "numpy",
        "scipy",
        "xarray",
        "pandas>=1.5",
        "matplotlib",
        "rich",
        "tomli; python_version < '3.11'",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["gridtune=gridtune.cli:main"]},
    python_requires=">=3.8",
    include_package_data=True,
    package_data={"gridtune": ["data/*.rc"]},
)
