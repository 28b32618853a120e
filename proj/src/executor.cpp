#include "rcw/executor.hpp"

#include "rcw/types.hpp"

namespace rcw {

void Executor::run(std::size_t count, const std::function<void(std::size_t)>& job) {
    for (std::size_t i = 0; i < count; ++i) job(i);
}

Executor& sequential_executor() {
    static Executor seq;
    return seq;
}

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers) {
    if (workers < 1) throw ParameterError("worker count must be at least 1");
    errors_.resize(workers);
    // Worker 0 is the calling thread.
    for (std::size_t id = 1; id < workers; ++id) threads_.emplace_back([this, id] { loop(id); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
}

namespace {

void run_share(std::size_t id, std::size_t stride, std::size_t count, const std::function<void(std::size_t)>& job,
               std::exception_ptr& error) {
    for (std::size_t i = id; i < count; i += stride) {
        try {
            job(i);
        } catch (...) {
            if (!error) error = std::current_exception();
            return;
        }
    }
}

}  // namespace

void WorkerPool::loop(std::size_t id) {
    std::size_t seen = 0;
    while (true) {
        const std::function<void(std::size_t)>* job;
        std::size_t count;
        {
            std::unique_lock lock(mu_);
            wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            job = job_;
            count = count_;
        }
        run_share(id, workers_, count, *job, errors_[id]);
        {
            std::lock_guard lock(mu_);
            if (--pending_ == 0) done_.notify_all();
        }
    }
}

void WorkerPool::run(std::size_t count, const std::function<void(std::size_t)>& job) {
    if (workers_ == 1 || count <= 1) {
        Executor::run(count, job);
        return;
    }
    for (auto& e : errors_) e = nullptr;
    {
        std::lock_guard lock(mu_);
        job_ = &job;
        count_ = count;
        pending_ = workers_ - 1;
        ++generation_;
    }
    wake_.notify_all();
    run_share(0, workers_, count, job, errors_[0]);
    {
        std::unique_lock lock(mu_);
        done_.wait(lock, [&] { return pending_ == 0; });
        job_ = nullptr;
    }
    for (auto& e : errors_) {
        if (e) std::rethrow_exception(e);
    }
}

void WorkerPool::each_worker(const std::function<void(std::size_t)>& job) { run(workers_, job); }

}  // namespace rcw
