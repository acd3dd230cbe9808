#include "cidnst/common.hpp"
