// import fake.Thing;
import com.example.App; // entry point
