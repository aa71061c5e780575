#pragma once

#define FARMTREAT_VERSION "0.1.0"
