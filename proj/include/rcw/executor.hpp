#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rcw {

/// Runs `count` independent jobs. Jobs write into their own slots, so the
/// caller reduces in index order and results never depend on scheduling.
class Executor {
public:
    virtual ~Executor() = default;
    virtual std::size_t size() const { return 1; }
    /// Calls job(i) for every i < count and rethrows a failure once all
    /// workers have stopped.
    virtual void run(std::size_t count, const std::function<void(std::size_t)>& job);
};

/// Fixed pool of worker threads. Job i of a batch goes to worker i mod size,
/// so per-worker state can be indexed by worker id.
class WorkerPool final : public Executor {
public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool() override;
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::size_t size() const override { return workers_; }
    void run(std::size_t count, const std::function<void(std::size_t)>& job) override;
    /// Calls job(worker) once on every worker.
    void each_worker(const std::function<void(std::size_t)>& job);

private:
    void loop(std::size_t id);

    std::size_t workers_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t count_ = 0;
    std::size_t generation_ = 0;
    std::size_t pending_ = 0;
    bool stop_ = false;
    std::vector<std::exception_ptr> errors_;
};

Executor& sequential_executor();

}  // namespace rcw
