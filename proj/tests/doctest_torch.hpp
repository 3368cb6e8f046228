#pragma once

// c10 logging defines CHECK as well
#undef CHECK
#include <doctest.h>
