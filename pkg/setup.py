from setuptools import setup, find_packages

with open("README.md", "r") as f:
    long_description = f.read()

setup(
    name = "subrate",
    version = "0.1.0",
    author = "sozuberry",
    author_email = "sozuberry@gmail.com",
    description = "Bit rate estimation of quantized transform coefficient blocks from sub-block features",
    long_description = long_description,
    long_description_content_type = "text/markdown",
    packages = find_packages(exclude=["tests"]),
    install_requires = ["numpy>=1.22", "scipy>=1.8", "typing_extensions"],
    entry_points = {"console_scripts": ["subrate = subrate.cli:main"]},
    classifiers = [
        "Programming Language :: Python :: 3.9",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
