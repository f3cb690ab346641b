#pragma once

#define FGTT_VERSION "0.1.0"
