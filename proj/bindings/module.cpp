#include <pybind11/pybind11.h>
PYBIND11_MODULE(_cidnst, m) { m.doc() = "cidnst"; }
