#pragma once

namespace mcpipe {

// A pipeline stage owning one input and one output channel end. step()
// performs one bounded slice of work (at most one word in and one word out
// per sub-stage) and reports whether anything moved, so a scheduler can
// poll stages round-robin or spin them on dedicated threads.
class Stage {
public:
    virtual ~Stage() = default;
    virtual bool step() = 0;
    virtual const char* name() const = 0;
};

}  // namespace mcpipe
